#include "core/checkpoint.hpp"

#include <fstream>
#include <numeric>

#include "core/error.hpp"
#include "core/text.hpp"

namespace hzsl {

void Checkpoint::put(const std::string& name, const Eigen::MatrixXd& m) {
  Tensor t;
  t.shape = {m.rows(), m.cols()};
  t.data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(m(r, c));
  }
  tensors[name] = std::move(t);
}

void Checkpoint::put(const std::string& name, const Eigen::VectorXd& v) {
  tensors[name] = Tensor{{v.size()}, {v.data(), v.data() + v.size()}};
}

void Checkpoint::put_scalar(const std::string& name, double value) {
  tensors[name] = Tensor{{}, {value}};
}

const Tensor& Checkpoint::tensor(const std::string& name,
                                 std::size_t rank) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    fail(ErrorCode::kParse, "checkpoint has no tensor '" + name + "'");
  }
  if (it->second.shape.size() != rank) {
    fail(ErrorCode::kParse, "checkpoint tensor '" + name + "' has rank " +
                                std::to_string(it->second.shape.size()) +
                                ", expected " + std::to_string(rank));
  }
  return it->second;
}

Eigen::MatrixXd Checkpoint::matrix(const std::string& name) const {
  const auto& t = tensor(name, 2);
  Eigen::MatrixXd m(t.shape[0], t.shape[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[k++];
  }
  return m;
}

Eigen::VectorXd Checkpoint::vector(const std::string& name) const {
  const auto& t = tensor(name, 1);
  return Eigen::Map<const Eigen::VectorXd>(t.data.data(), t.shape[0]);
}

double Checkpoint::scalar(const std::string& name) const {
  return tensor(name, 0).data.at(0);
}

const std::string& Checkpoint::get_meta(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) {
    fail(ErrorCode::kParse, "checkpoint has no meta entry '" + key + "'");
  }
  return it->second;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  text::write_format_line(out, "checkpoint");
  out << "kind " << ckpt.kind << '\n';
  for (const auto& [key, value] : ckpt.meta) {
    out << "meta " << key << ' ' << value << '\n';
  }
  for (const auto& [name, t] : ckpt.tensors) {
    out << "tensor " << name << ' ' << t.shape.size();
    for (auto d : t.shape) out << ' ' << d;
    out << '\n';
    const std::size_t row = t.shape.size() >= 2 ? t.shape.back() : t.data.size();
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      out << text::format_double(t.data[i]);
      out << ((i + 1) % row == 0 ? '\n' : ' ');
    }
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in, const std::string& name) {
  Checkpoint ckpt;
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  auto bad = [&](const std::string& what) {
    fail(ErrorCode::kParse, text::where(name, line_no) + ": " + what);
  };

  if (!next() || !text::check_format_line(line, "checkpoint",
                                          text::where(name, line_no))) {
    bad("missing '# format: checkpoint v1' line");
  }
  if (!next() || line.rfind("kind ", 0) != 0) bad("missing kind line");
  ckpt.kind = line.substr(5);

  bool ended = false;
  std::vector<double> pending;
  while (next()) {
    if (line == "end") {
      ended = true;
      break;
    }
    if (line.rfind("meta ", 0) == 0) {
      auto rest = std::string_view(line).substr(5);
      auto sp = rest.find(' ');
      if (sp == std::string_view::npos) {
        ckpt.meta[std::string(rest)] = "";
      } else {
        ckpt.meta[std::string(rest.substr(0, sp))] =
            std::string(rest.substr(sp + 1));
      }
      continue;
    }
    if (line.rfind("tensor ", 0) != 0) bad("unexpected line '" + line + "'");
    auto fields = text::split_ws(line);
    if (fields.size() < 3) bad("malformed tensor line");
    auto rank = text::parse_int(fields[2]);
    if (!rank || *rank < 0 || fields.size() != static_cast<std::size_t>(3 + *rank)) {
      bad("malformed tensor shape");
    }
    Tensor t;
    for (std::int64_t k = 0; k < *rank; ++k) {
      auto d = text::parse_int(fields[3 + k]);
      if (!d || *d < 0) bad("malformed tensor dimension");
      t.shape.push_back(*d);
    }
    const std::size_t count = std::accumulate(
        t.shape.begin(), t.shape.end(), std::size_t{1},
        [](std::size_t a, std::int64_t b) { return a * static_cast<std::size_t>(b); });
    const std::string tensor_name(fields[1]);
    t.data.reserve(count);
    while (t.data.size() < count) {
      if (!next()) bad("truncated tensor '" + tensor_name + "'");
      for (auto tok : text::split_ws(line)) {
        auto v = text::parse_double(tok);
        if (!v) bad("bad value '" + std::string(tok) + "'");
        t.data.push_back(*v);
      }
    }
    if (t.data.size() != count) bad("tensor '" + tensor_name + "' overflows");
    ckpt.tensors[tensor_name] = std::move(t);
  }
  if (!ended) bad("missing 'end'");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return read_checkpoint(in, path);
}

}  // namespace hzsl
