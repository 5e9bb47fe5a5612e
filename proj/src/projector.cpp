#include "situ/projector.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace situ {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw ValidationError("matrix data size does not match its shape");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string to_string(SelectMode m) { return m == SelectMode::linear ? "linear" : "scan"; }
std::string to_string(FuseMode m) { return m == FuseMode::add ? "add" : "star"; }

SelectMode select_mode_from_string(const std::string& s) {
  if (s == "linear") return SelectMode::linear;
  if (s == "scan" || s == "mamba") return SelectMode::scan;
  throw ValidationError("unknown selection mode '" + s + "' (linear or scan)");
}

FuseMode fuse_mode_from_string(const std::string& s) {
  if (s == "add" || s == "+") return FuseMode::add;
  if (s == "star" || s == "*") return FuseMode::star;
  throw ValidationError("unknown fusion mode '" + s + "' (add or star)");
}

namespace {

void expect_shape(const Matrix& m, std::size_t r, std::size_t c, const char* name) {
  if (m.rows() != r || m.cols() != c) {
    std::ostringstream msg;
    msg << name << " is " << m.rows() << "x" << m.cols() << ", expected " << r << "x" << c;
    throw ValidationError(msg.str());
  }
  if (!m.all_finite()) throw ValidationError(std::string(name) + " has non-finite entries");
}

void check_tokens(const Matrix& x, std::size_t dim, const char* name) {
  if (x.rows() == 0 || x.cols() == 0) throw ValidationError(std::string(name) + " must have at least one token");
  if (x.cols() != dim) {
    throw ValidationError(std::string(name) + " has " + std::to_string(x.cols()) + " channels, parameters expect " +
                          std::to_string(dim));
  }
  if (!x.all_finite()) throw ValidationError(std::string(name) + " has non-finite entries");
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Zero tensors with the same shapes as the active ones.
ProjectorParams zeros_like(const ProjectorParams& p) {
  ProjectorParams g = p;
  for (auto& [name, m] : g.tensors()) std::fill(m->data().begin(), m->data().end(), 0.0);
  return g;
}

}  // namespace

void ProjectorParams::validate() const {
  if (dim == 0) throw ValidationError("projector dimension must be at least 1");
  if (select == SelectMode::linear) {
    expect_shape(w, dim, dim, "w");
    expect_shape(bias, 1, dim, "bias");
  } else {
    if (state == 0) throw ValidationError("scan mode needs a state size of at least 1");
    expect_shape(wg, dim, dim, "wg");
    expect_shape(bg, 1, dim, "bg");
    expect_shape(decay, dim, state, "decay");
    expect_shape(wb, state, dim, "wb");
    expect_shape(wc, state, dim, "wc");
  }
}

std::vector<std::pair<std::string, Matrix*>> ProjectorParams::tensors() {
  if (select == SelectMode::linear) return {{"w", &w}, {"bias", &bias}};
  return {{"wg", &wg}, {"bg", &bg}, {"decay", &decay}, {"wb", &wb}, {"wc", &wc}};
}

std::vector<std::pair<std::string, const Matrix*>> ProjectorParams::tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [n, m] : const_cast<ProjectorParams*>(this)->tensors()) out.emplace_back(n, m);
  return out;
}

std::size_t ProjectorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors()) n += m->data().size();
  return n;
}

ProjectorParams identity_linear(std::size_t dim, FuseMode fuse) {
  ProjectorParams p;
  p.select = SelectMode::linear;
  p.fuse = fuse;
  p.dim = dim;
  p.w = Matrix::identity(dim);
  p.bias = Matrix(1, dim);
  return p;
}

ProjectorParams random_params(std::size_t dim, std::size_t state, SelectMode select, FuseMode fuse,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  std::uniform_real_distribution<double> unif(0.0, 3.0);
  auto randn = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (auto& v : m.data()) v = normal(rng);
    return m;
  };
  ProjectorParams p;
  p.select = select;
  p.fuse = fuse;
  p.dim = dim;
  if (select == SelectMode::linear) {
    p.w = randn(dim, dim);
    p.bias = randn(1, dim);
  } else {
    p.state = state;
    p.wg = randn(dim, dim);
    p.bg = randn(1, dim);
    p.decay = Matrix(dim, state);
    for (auto& v : p.decay.data()) v = unif(rng);
    p.wb = randn(state, dim);
    p.wc = randn(state, dim);
  }
  p.validate();
  return p;
}

Matrix random_tokens(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(n, dim);
  for (auto& v : m.data()) v = normal(rng);
  return m;
}

// --- forward ----------------------------------------------------------------------------------

ScanGates scan_gates(const Matrix& x, const ProjectorParams& p) {
  const std::size_t n = x.rows();
  const std::size_t d = p.dim;
  const std::size_t s = p.state;
  ScanGates g;
  g.a.assign(n, Matrix(d, s));
  g.b = Matrix(n, s);
  g.c = Matrix(n, s);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      double z = p.bg(0, i);
      for (std::size_t j = 0; j < d; ++j) z += p.wg(i, j) * x(t, j);
      for (std::size_t k = 0; k < s; ++k) g.a[t](i, k) = sigmoid(z + p.decay(i, k));
    }
    for (std::size_t k = 0; k < s; ++k) {
      double b = 0.0;
      double c = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        b += p.wb(k, j) * x(t, j);
        c += p.wc(k, j) * x(t, j);
      }
      g.b(t, k) = b;
      g.c(t, k) = c;
    }
  }
  return g;
}

namespace {

// Hidden states h_t for t = 0..N-1, each D x S.
std::vector<Matrix> scan_states(const Matrix& x, const ScanGates& g) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const std::size_t s = g.b.cols();
  std::vector<Matrix> h(n, Matrix(d, s));
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < s; ++k) {
        const double prev = t == 0 ? 0.0 : h[t - 1](i, k);
        h[t](i, k) = g.a[t](i, k) * prev + g.b(t, k) * x(t, i);
      }
    }
  }
  return h;
}

Matrix readout(const std::vector<Matrix>& h, const ScanGates& g, std::size_t d) {
  const std::size_t n = h.size();
  const std::size_t s = g.c.cols();
  Matrix y(n, d);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < s; ++k) acc += g.c(t, k) * h[t](i, k);
      y(t, i) = acc;
    }
  }
  return y;
}

}  // namespace

Matrix scan_recurrence(const Matrix& x, const ScanGates& g) {
  if (g.a.size() != x.rows() || g.b.rows() != x.rows() || g.c.rows() != x.rows() || g.b.cols() != g.c.cols()) {
    throw ValidationError("scan gates do not match the token count");
  }
  for (const auto& a : g.a) {
    if (a.rows() != x.cols() || a.cols() != g.b.cols()) throw ValidationError("scan decay gate has the wrong shape");
  }
  return readout(scan_states(x, g), g, x.cols());
}

Matrix select_prev(const Matrix& prev, const ProjectorParams& p) {
  p.validate();
  check_tokens(prev, p.dim, "previous-scene tokens");
  if (p.select == SelectMode::scan) return scan_recurrence(prev, scan_gates(prev, p));
  Matrix y(prev.rows(), p.dim);
  for (std::size_t t = 0; t < prev.rows(); ++t) {
    for (std::size_t i = 0; i < p.dim; ++i) {
      double acc = p.bias(0, i);
      for (std::size_t j = 0; j < p.dim; ++j) acc += p.w(i, j) * prev(t, j);
      y(t, i) = acc;
    }
  }
  return y;
}

Matrix fuse(const Matrix& prev_sel, const Matrix& curr, FuseMode mode) {
  if (prev_sel.rows() != curr.rows() || prev_sel.cols() != curr.cols()) {
    std::ostringstream msg;
    msg << "cannot fuse " << prev_sel.rows() << "x" << prev_sel.cols() << " with " << curr.rows() << "x"
        << curr.cols() << " tokens";
    throw ValidationError(msg.str());
  }
  Matrix out = curr;
  for (std::size_t k = 0; k < out.data().size(); ++k) {
    out.data()[k] = mode == FuseMode::add ? prev_sel.data()[k] + curr.data()[k] : prev_sel.data()[k] * curr.data()[k];
  }
  return out;
}

Matrix forward(const Matrix& prev, const Matrix& curr, const ProjectorParams& p) {
  check_tokens(curr, p.dim, "current-scene tokens");
  return fuse(select_prev(prev, p), curr, p.fuse);
}

std::vector<Matrix> forward_batch(const std::vector<std::pair<Matrix, Matrix>>& pairs, const ProjectorParams& p,
                                  unsigned threads) {
  p.validate();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, std::max<std::size_t>(1, pairs.size()));
  std::vector<Matrix> out(pairs.size());
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < pairs.size(); i += threads) out[i] = forward(pairs[i].first, pairs[i].second, p);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// --- backward ---------------------------------------------------------------------------------

double loss(const Matrix& prev, const Matrix& curr, const ProjectorParams& p) {
  const Matrix out = forward(prev, curr, p);
  double acc = 0.0;
  for (double v : out.data()) acc += v * v;
  return acc;
}

Gradients backward(const Matrix& prev, const Matrix& curr, const ProjectorParams& p) {
  check_tokens(curr, p.dim, "current-scene tokens");
  p.validate();
  check_tokens(prev, p.dim, "previous-scene tokens");
  if (prev.rows() != curr.rows()) throw ValidationError("previous and current token counts differ");
  const std::size_t n = prev.rows();
  const std::size_t d = p.dim;

  Gradients g{zeros_like(p), Matrix(n, d), Matrix(n, d)};

  ScanGates gates;
  std::vector<Matrix> h;
  Matrix y;
  if (p.select == SelectMode::scan) {
    gates = scan_gates(prev, p);
    h = scan_states(prev, gates);
    y = readout(h, gates, d);
  } else {
    y = select_prev(prev, p);
  }
  const Matrix out = fuse(y, curr, p.fuse);

  Matrix dy(n, d);
  for (std::size_t k = 0; k < out.data().size(); ++k) {
    const double dout = 2.0 * out.data()[k];
    if (p.fuse == FuseMode::add) {
      dy.data()[k] = dout;
      g.curr.data()[k] = dout;
    } else {
      dy.data()[k] = dout * curr.data()[k];
      g.curr.data()[k] = dout * y.data()[k];
    }
  }

  if (p.select == SelectMode::linear) {
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t i = 0; i < d; ++i) {
        g.params.bias(0, i) += dy(t, i);
        for (std::size_t j = 0; j < d; ++j) {
          g.params.w(i, j) += dy(t, i) * prev(t, j);
          g.prev(t, j) += dy(t, i) * p.w(i, j);
        }
      }
    }
    return g;
  }

  const std::size_t s = p.state;
  Matrix dh(d, s);  // carried gradient w.r.t. h_t, accumulated backwards
  for (std::size_t tt = n; tt-- > 0;) {
    // dL/dh_t = dy_t[d] c_t[s] + (dL/dh_{t+1}) a_{t+1}, the latter already folded into dh.
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < s; ++k) dh(i, k) += dy(tt, i) * gates.c(tt, k);
    }
    std::vector<double> dgate(d, 0.0);
    std::vector<double> db(s, 0.0);
    std::vector<double> dc(s, 0.0);
    for (std::size_t k = 0; k < s; ++k) {
      for (std::size_t i = 0; i < d; ++i) dc[k] += dy(tt, i) * h[tt](i, k);
    }
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < s; ++k) {
        const double a = gates.a[tt](i, k);
        const double hprev = tt == 0 ? 0.0 : h[tt - 1](i, k);
        const double dz = dh(i, k) * hprev * a * (1.0 - a);
        g.params.decay(i, k) += dz;
        dgate[i] += dz;
        db[k] += dh(i, k) * prev(tt, i);
        g.prev(tt, i) += dh(i, k) * gates.b(tt, k);
      }
    }
    for (std::size_t i = 0; i < d; ++i) {
      g.params.bg(0, i) += dgate[i];
      for (std::size_t j = 0; j < d; ++j) {
        g.params.wg(i, j) += dgate[i] * prev(tt, j);
        g.prev(tt, j) += dgate[i] * p.wg(i, j);
      }
    }
    for (std::size_t k = 0; k < s; ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        g.params.wb(k, j) += db[k] * prev(tt, j);
        g.params.wc(k, j) += dc[k] * prev(tt, j);
        g.prev(tt, j) += db[k] * p.wb(k, j) + dc[k] * p.wc(k, j);
      }
    }
    // Pass the state gradient through the decay to h_{t-1}.
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < s; ++k) dh(i, k) *= gates.a[tt](i, k);
    }
  }
  return g;
}

GradCheck grad_check(const ProjectorParams& p, const Matrix& prev, const Matrix& curr, double eps) {
  if (!(eps > 0.0)) throw ValidationError("finite-difference step must be positive");
  const Gradients analytic = backward(prev, curr, p);
  GradCheck out;
  auto compare = [&](const std::string& name, std::size_t idx, double a, double num) {
    const double denom = std::max({std::fabs(a), std::fabs(num), 1e-8});
    const double rel = std::fabs(a - num) / denom;
    ++out.checked;
    if (out.worst.empty() || rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = name + "[" + std::to_string(idx) + "]";
    }
  };

  // Central difference of the loss taken output by output, (y+ - y-)(y+ + y-), so the sum of
  // squares never cancels against itself.
  auto central = [&](const Matrix& x, const Matrix& c, const ProjectorParams& pp, double& slot) {
    const double keep = slot;
    slot = keep + eps;
    const Matrix up = forward(x, c, pp);
    slot = keep - eps;
    const Matrix down = forward(x, c, pp);
    slot = keep;
    double acc = 0.0;
    for (std::size_t i = 0; i < up.data().size(); ++i) {
      acc += (up.data()[i] - down.data()[i]) * (up.data()[i] + down.data()[i]);
    }
    return acc / (2.0 * eps);
  };

  ProjectorParams q = p;
  auto qt = q.tensors();
  auto at = analytic.params.tensors();
  for (std::size_t ti = 0; ti < qt.size(); ++ti) {
    auto& data = qt[ti].second->data();
    for (std::size_t k = 0; k < data.size(); ++k) {
      compare(qt[ti].first, k, at[ti].second->data()[k], central(prev, curr, q, data[k]));
    }
  }
  Matrix x = prev;
  for (std::size_t k = 0; k < x.data().size(); ++k) {
    compare("prev", k, analytic.prev.data()[k], central(x, curr, p, x.data()[k]));
  }
  Matrix c = curr;
  for (std::size_t k = 0; k < c.data().size(); ++k) {
    compare("curr", k, analytic.curr.data()[k], central(prev, c, p, c.data()[k]));
  }
  return out;
}

// --- parameter files --------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'C', 'P', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
  return v;
}

}  // namespace

void save_params(const std::filesystem::path& path, const ProjectorParams& p) {
  p.validate();
  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(p.dim));
  put_u32(out, static_cast<std::uint32_t>(p.select == SelectMode::scan ? p.state : 0));
  out.push_back(static_cast<char>(p.select));
  out.push_back(static_cast<char>(p.fuse));
  out.push_back('\0');
  out.push_back('\0');
  for (const auto& [name, m] : p.tensors()) {
    for (double v : m->data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("failed while writing " + path.string());
}

ProjectorParams load_params(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  constexpr std::size_t kHeader = 20;
  if (in.size() < kHeader) throw ParseError(path.string() + ": truncated projector header", in.size());
  if (std::memcmp(in.data(), kMagic, 4) != 0) throw ParseError(path.string() + ": not a projector parameter file", 0);
  if (get_u32(in, 4) != kVersion) throw ParseError(path.string() + ": unsupported version", 4);
  ProjectorParams p;
  p.dim = get_u32(in, 8);
  p.state = get_u32(in, 12);
  const auto sel = static_cast<unsigned char>(in[16]);
  const auto fus = static_cast<unsigned char>(in[17]);
  if (sel > 1) throw ParseError(path.string() + ": bad selection mode", 16);
  if (fus > 1) throw ParseError(path.string() + ": bad fusion mode", 17);
  p.select = static_cast<SelectMode>(sel);
  p.fuse = static_cast<FuseMode>(fus);
  if (p.dim == 0 || p.dim > 65536 || p.state > 65536) throw ParseError(path.string() + ": implausible dimensions", 8);
  const std::size_t d = p.dim;
  const std::size_t s = p.state;
  if (p.select == SelectMode::linear) {
    p.w = Matrix(d, d);
    p.bias = Matrix(1, d);
  } else {
    p.wg = Matrix(d, d);
    p.bg = Matrix(1, d);
    p.decay = Matrix(d, s);
    p.wb = Matrix(s, d);
    p.wc = Matrix(s, d);
  }
  std::size_t at = kHeader;
  const std::size_t need = kHeader + 4 * p.parameter_count();
  if (in.size() != need) {
    throw ParseError(path.string() + ": expected " + std::to_string(need) + " bytes, found " +
                         std::to_string(in.size()),
                     std::min(in.size(), need));
  }
  for (auto& [name, m] : p.tensors()) {
    for (auto& v : m->data()) {
      v = static_cast<double>(std::bit_cast<float>(get_u32(in, at)));
      at += 4;
    }
  }
  p.validate();
  return p;
}

}  // namespace situ
