#include "core/attributes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "core/error.hpp"
#include "core/text.hpp"

namespace hzsl {

AttributeTable::AttributeTable(SymbolTable symbols, Eigen::MatrixXd vectors)
    : symbols_(std::move(symbols)), vectors_(std::move(vectors)) {
  if (static_cast<std::size_t>(vectors_.rows()) != symbols_.size()) {
    fail(ErrorCode::kDimensionMismatch,
         "attribute table has " + std::to_string(vectors_.rows()) +
             " rows for " + std::to_string(symbols_.size()) + " labels");
  }
  if (vectors_.cols() == 0 && vectors_.rows() > 0) {
    fail(ErrorCode::kDimensionMismatch, "attribute dimension must be positive");
  }
  norms_ = vectors_.rowwise().norm();
  for (Eigen::Index i = 0; i < vectors_.rows(); ++i) {
    if (norms_(i) == 0.0) {
      const auto& l = symbols_.label(static_cast<LabelId>(i));
      fail(ErrorCode::kZeroVector, "attribute vector of '" + l + "' is zero",
           {l});
    }
  }
}

std::string embedding_token(std::string_view label) {
  std::string out(label);
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

AttributeTable read_embeddings(std::istream& in, const std::string& name,
                               const SymbolTable& symbols) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!have_header && std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && text::check_format_line(line, "embeddings",
                                                text::where(name, line_no))) {
      continue;
    }
    have_header = true;
  }
  if (!have_header) fail(ErrorCode::kMalformedHeader, name + ": empty file");
  auto header = text::split_ws(line);
  std::optional<std::int64_t> count, dim;
  if (header.size() == 2) {
    count = text::parse_int(header[0]);
    dim = text::parse_int(header[1]);
  }
  if (!count || !dim || *count < 0 || *dim <= 0) {
    fail(ErrorCode::kMalformedHeader,
         text::where(name, line_no) + ": expected 'V d' header, got '" + line +
             "'");
  }

  std::unordered_map<std::string, LabelId> wanted;
  for (LabelId id = 0; id < static_cast<LabelId>(symbols.size()); ++id) {
    wanted.emplace(embedding_token(symbols.label(id)), id);
  }
  Eigen::MatrixXd rows(symbols.size(), *dim);
  std::vector<bool> filled(symbols.size(), false);

  std::int64_t seen = 0;
  while (seen < *count && std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = text::split_ws(line);
    if (fields.empty()) continue;
    ++seen;
    if (static_cast<std::int64_t>(fields.size()) != *dim + 1) {
      fail(ErrorCode::kDimensionMismatch,
           text::where(name, line_no) + ": expected " + std::to_string(*dim) +
               " values, got " + std::to_string(fields.size() - 1));
    }
    auto it = wanted.find(std::string(fields[0]));
    if (it == wanted.end() || filled[it->second]) continue;
    for (std::int64_t k = 0; k < *dim; ++k) {
      auto v = text::parse_double(fields[k + 1]);
      if (!v || !std::isfinite(*v)) {
        fail(ErrorCode::kParse, text::where(name, line_no) + ": bad value '" +
                                    std::string(fields[k + 1]) + "'");
      }
      rows(it->second, k) = *v;
    }
    filled[it->second] = true;
  }
  if (seen < *count) {
    fail(ErrorCode::kParse, name + ": header promises " +
                                std::to_string(*count) + " vectors, found " +
                                std::to_string(seen));
  }
  for (LabelId id = 0; id < static_cast<LabelId>(symbols.size()); ++id) {
    if (!filled[id]) {
      fail(ErrorCode::kMissingLabel,
           name + ": no vector for label '" + symbols.label(id) + "'",
           {symbols.label(id)});
    }
  }
  return AttributeTable(symbols, std::move(rows));
}

AttributeTable load_embeddings(const std::string& path,
                               const SymbolTable& symbols) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return read_embeddings(in, path, symbols);
}

void write_embeddings(std::ostream& out, const AttributeTable& table) {
  text::write_format_line(out, "embeddings");
  out << table.size() << ' ' << table.dim() << '\n';
  for (LabelId id = 0; id < static_cast<LabelId>(table.size()); ++id) {
    out << embedding_token(table.symbols().label(id));
    for (int k = 0; k < table.dim(); ++k) {
      out << ' ' << text::format_double(table.matrix()(id, k));
    }
    out << '\n';
  }
}

void save_embeddings(const std::string& path, const AttributeTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  write_embeddings(out, table);
}

double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& u,
                         const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (u.size() != v.size()) {
    fail(ErrorCode::kDimensionMismatch, "cosine of vectors with dimensions " +
                                            std::to_string(u.size()) + " and " +
                                            std::to_string(v.size()));
  }
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) {
    fail(ErrorCode::kZeroVector, "cosine similarity of a zero vector");
  }
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

}  // namespace hzsl
