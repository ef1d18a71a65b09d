#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

#include "core/hierarchy.hpp"

namespace hzsl {

// Label attribute vectors, one row per label id of the bound symbol table.
class AttributeTable {
 public:
  AttributeTable() = default;
  // Throws kDimensionMismatch (row count) or kZeroVector.
  AttributeTable(SymbolTable symbols, Eigen::MatrixXd vectors);

  std::size_t size() const { return static_cast<std::size_t>(vectors_.rows()); }
  int dim() const { return static_cast<int>(vectors_.cols()); }
  const SymbolTable& symbols() const { return symbols_; }
  Eigen::VectorXd vector(LabelId id) const { return vectors_.row(id); }
  const Eigen::MatrixXd& matrix() const { return vectors_; }
  double norm(LabelId id) const { return norms_(id); }
  const Eigen::VectorXd& norms() const { return norms_; }

  friend bool operator==(const AttributeTable& a, const AttributeTable& b) {
    return a.symbols_.labels() == b.symbols_.labels() &&
           a.vectors_.rows() == b.vectors_.rows() &&
           a.vectors_.cols() == b.vectors_.cols() && a.vectors_ == b.vectors_;
  }

 private:
  SymbolTable symbols_;
  Eigen::MatrixXd vectors_;
  Eigen::VectorXd norms_;
};

// "sea lion" -> "sea_lion".
std::string embedding_token(std::string_view label);

// word2vec text layout: "V d" header then "token v1 .. vd" lines. An optional
// "# format: embeddings v1" line may precede the header. Returns the rows for
// exactly `symbols`; extra tokens in the file are ignored.
AttributeTable read_embeddings(std::istream& in, const std::string& name,
                               const SymbolTable& symbols);
AttributeTable load_embeddings(const std::string& path,
                               const SymbolTable& symbols);
void write_embeddings(std::ostream& out, const AttributeTable& table);
void save_embeddings(const std::string& path, const AttributeTable& table);

// Throws kZeroVector or kDimensionMismatch. Result clamped to [-1, 1].
double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& u,
                         const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace hzsl
