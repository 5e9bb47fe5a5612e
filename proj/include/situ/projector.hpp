#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "situ/common.hpp"

namespace situ {

// Dense row-major matrix; rows are tokens, columns are channels.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  static Matrix identity(std::size_t n);
  bool all_finite() const;
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_{0};
  std::size_t cols_{0};
  std::vector<double> data_;
};

enum class SelectMode : std::uint8_t { linear = 0, scan = 1 };
enum class FuseMode : std::uint8_t { add = 0, star = 1 };

std::string to_string(SelectMode m);
std::string to_string(FuseMode m);
SelectMode select_mode_from_string(const std::string& s);
FuseMode fuse_mode_from_string(const std::string& s);

// Linear mode:  y_t = W x_t + bias.
// Scan mode, per token t and channel d with S states:
//   a_t[d,s] = sigmoid((Wg x_t + bg)[d] + decay[d,s])
//   b_t = Wb x_t,  c_t = Wc x_t                      (length S, shared by all channels)
//   h_t[d,s] = a_t[d,s] h_{t-1}[d,s] + b_t[s] x_t[d],  h_0 = 0
//   y_t[d] = sum_s c_t[s] h_t[d,s]
struct ProjectorParams {
  SelectMode select{SelectMode::linear};
  FuseMode fuse{FuseMode::add};
  std::size_t dim{0};    // D
  std::size_t state{0};  // S, scan mode only

  Matrix w;      // D x D
  Matrix bias;   // 1 x D
  Matrix wg;     // D x D
  Matrix bg;     // 1 x D
  Matrix decay;  // D x S
  Matrix wb;     // S x D
  Matrix wc;     // S x D

  // Throws ValidationError when shapes disagree with dim/state or values are not finite.
  void validate() const;
  // The trainable tensors of the active mode, in file order.
  std::vector<std::pair<std::string, Matrix*>> tensors();
  std::vector<std::pair<std::string, const Matrix*>> tensors() const;
  std::size_t parameter_count() const;
};

ProjectorParams identity_linear(std::size_t dim, FuseMode fuse);
// Seeded random initialisation: weights N(0, 1/D), decay logits uniform in [0, 3].
ProjectorParams random_params(std::size_t dim, std::size_t state, SelectMode select, FuseMode fuse,
                              std::uint64_t seed);
Matrix random_tokens(std::size_t n, std::size_t dim, std::uint64_t seed);

struct ScanGates {
  std::vector<Matrix> a;  // per token, D x S
  Matrix b;               // N x S
  Matrix c;               // N x S
};

ScanGates scan_gates(const Matrix& x, const ProjectorParams& p);
// The bare recurrence with explicit gates.
Matrix scan_recurrence(const Matrix& x, const ScanGates& g);

Matrix select_prev(const Matrix& prev, const ProjectorParams& p);
Matrix fuse(const Matrix& prev_sel, const Matrix& curr, FuseMode mode);
Matrix forward(const Matrix& prev, const Matrix& curr, const ProjectorParams& p);

// Forward over independent (prev, curr) pairs on up to `threads` workers.
std::vector<Matrix> forward_batch(const std::vector<std::pair<Matrix, Matrix>>& pairs, const ProjectorParams& p,
                                  unsigned threads = 0);

struct Gradients {
  ProjectorParams params;  // same layout, holding dL/dparam
  Matrix prev;
  Matrix curr;
};

// Loss is the sum of squares of the forward output.
double loss(const Matrix& prev, const Matrix& curr, const ProjectorParams& p);
Gradients backward(const Matrix& prev, const Matrix& curr, const ProjectorParams& p);

struct GradCheck {
  double max_rel_error{0.0};
  std::string worst;  // "<tensor>[i]"
  std::size_t checked{0};
};

// Central differences on every parameter and input entry, accumulated output by output to avoid
// cancellation in the summed loss; relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheck grad_check(const ProjectorParams& p, const Matrix& prev, const Matrix& curr, double eps = 1e-6);

// Binary layout, little-endian: "SCPP", u32 version (1), u32 D, u32 S, u8 select, u8 fuse, u16 zero,
// then the active mode's tensors as row-major fp32 in tensors() order.
void save_params(const std::filesystem::path& path, const ProjectorParams& p);
ProjectorParams load_params(const std::filesystem::path& path);

}  // namespace situ
