#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace hzsl {

// Text key-value container for model weights.
//
//   # format: checkpoint v1
//   kind <kind>
//   meta <key> <value to end of line>        (zero or more, sorted by key)
//   tensor <name> <rank> <dim0> .. <dimR-1>  (sorted by name)
//   <row-major values, one matrix row per line>
//   end
//
// Values are written in shortest round-trip decimal form, so save/load is
// lossless for every finite double.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> data;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

class Checkpoint {
 public:
  std::string kind;
  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor> tensors;

  void put(const std::string& name, const Eigen::MatrixXd& m);
  void put(const std::string& name, const Eigen::VectorXd& v);
  void put_scalar(const std::string& name, double value);

  // All accessors throw kParse naming the missing/misshapen entry.
  Eigen::MatrixXd matrix(const std::string& name) const;
  Eigen::VectorXd vector(const std::string& name) const;
  double scalar(const std::string& name) const;
  const std::string& get_meta(const std::string& key) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;

 private:
  const Tensor& tensor(const std::string& name, std::size_t rank) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in, const std::string& name);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hzsl
