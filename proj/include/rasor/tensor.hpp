#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rasor/errors.hpp"

namespace rasor {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

/// Dense row-major tensor of rank 1 or 2. Rank-1 tensors behave as a single
/// row wherever matrix semantics are required. `g` is the gradient
/// accumulator, allocated on demand and shaped like `v`.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> v;
  std::vector<T> g;
  bool requires_grad = false;

  Tensor() = default;

  explicit Tensor(Shape sh, T fill = T(0)) : shape(std::move(sh)) {
    std::size_t n = 1;
    if (shape.empty() || shape.size() > 2)
      throw DimError("tensor rank must be 1 or 2, got shape " +
                     shape_str(shape));
    for (int d : shape) {
      if (d <= 0)
        throw DimError("tensor dimensions must be positive, got shape " +
                       shape_str(shape));
      n *= static_cast<std::size_t>(d);
    }
    v.assign(n, fill);
  }

  static Tensor scalar(T x) {
    Tensor t(Shape{1});
    t.v[0] = x;
    return t;
  }

  static Tensor vec(std::vector<T> xs) {
    Tensor t(Shape{static_cast<int>(xs.size())});
    t.v = std::move(xs);
    return t;
  }

  static Tensor matrix(int r, int c, std::vector<T> xs) {
    Tensor t(Shape{r, c});
    if (xs.size() != t.v.size())
      throw DimError("matrix data size " + std::to_string(xs.size()) +
                     " does not match shape " + shape_str(t.shape));
    t.v = std::move(xs);
    return t;
  }

  static Tensor zeros(int r, int c) { return Tensor(Shape{r, c}); }

  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return rank() == 1 ? 1 : shape[0]; }
  int cols() const { return rank() == 1 ? shape[0] : shape[1]; }
  std::size_t size() const { return v.size(); }

  T& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols() + c]; }
  T at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * cols() + c];
  }

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), T(0));
  }
  void zero_grad() { g.assign(v.size(), T(0)); }
};

template <typename T>
bool all_finite(const std::vector<T>& xs) {
  for (T x : xs)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

/// Reverse-mode autodiff over a dynamically recorded tape.
///
/// Every op computes its value eagerly and records a backward rule. The tape
/// is in topological order by construction; backward() walks it exactly once
/// in reverse, accumulating gradients additively across fan-out, and finally
/// scatters leaf gradients into their parameter tensors (or a caller-supplied
/// sink for workers that keep private gradient buffers).
template <typename T>
class Graph {
 public:
  using Id = std::int32_t;
  using GradMap = std::unordered_map<const Tensor<T>*, std::vector<T>>;

  struct OpInfo {
    std::vector<Id> in;
    Id out;
  };

  Graph() : finite_checks(finite_checks_default()) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Process-wide default for the NaN/Inf debug assertion mode.
  static bool& finite_checks_default() {
    static bool on = false;
    return on;
  }

  bool finite_checks;

  Id constant(Tensor<T> value) {
    return push(std::move(value), nullptr, {}, false);
  }

  /// Trainable leaf: copies the parameter's current values; backward
  /// accumulates d loss / d leaf into the parameter's grad.
  Id leaf(Tensor<T>& param) {
    Tensor<T> val(param.shape);
    val.v = param.v;
    return push(std::move(val), &param, {}, param.requires_grad);
  }

  /// Row-gather leaf over a parameter matrix (embedding-style lookup);
  /// backward scatter-adds row gradients.
  Id gather_rows(Tensor<T>& param, std::vector<int> row_ids) {
    if (param.rank() != 2)
      throw DimError("gather_rows requires a matrix, got " +
                     shape_str(param.shape));
    int c = param.cols();
    Tensor<T> val(Shape{static_cast<int>(row_ids.size()), c});
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
      int r = row_ids[i];
      if (r < 0 || r >= param.rows())
        throw ContractError("gather_rows index " + std::to_string(r) +
                            " out of range for " + shape_str(param.shape));
      for (int j = 0; j < c; ++j) val.v[i * c + j] = param.at(r, j);
    }
    return push(std::move(val), &param, std::move(row_ids),
                param.requires_grad);
  }

  Id matmul(Id a, Id b) {
    const Tensor<T>& A = val(a);
    const Tensor<T>& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
      throw DimError("matmul shape mismatch: " + shape_str(A.shape) + " x " +
                     shape_str(B.shape));
    int m = A.rows(), k = A.cols(), n = B.cols();
    Tensor<T> C(Shape{m, n});
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        T aip = A.at(i, p);
        if (aip == T(0)) continue;
        for (int j = 0; j < n; ++j) C.at(i, j) += aip * B.at(p, j);
      }
    Id c = push(std::move(C), {a, b});
    record({a, b}, c, [this, a, b, c, m, k, n] {
      const auto& dC = gbuf(c);
      const Tensor<T>& A2 = val(a);
      const Tensor<T>& B2 = val(b);
      if (needs(a)) {
        auto& dA = gbuf(a);  // dA += dC * B^T
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            T acc = T(0);
            for (int j = 0; j < n; ++j)
              acc += dC[static_cast<std::size_t>(i) * n + j] * B2.at(p, j);
            dA[static_cast<std::size_t>(i) * k + p] += acc;
          }
      }
      if (needs(b)) {
        auto& dB = gbuf(b);  // dB += A^T * dC
        for (int p = 0; p < k; ++p)
          for (int i = 0; i < m; ++i) {
            T aip = A2.at(i, p);
            if (aip == T(0)) continue;
            for (int j = 0; j < n; ++j)
              dB[static_cast<std::size_t>(p) * n + j] +=
                  aip * dC[static_cast<std::size_t>(i) * n + j];
          }
      }
    });
    return c;
  }

  Id add(Id a, Id b) { return binary_elementwise(a, b, /*mul=*/false, false); }
  Id sub(Id a, Id b) { return binary_elementwise(a, b, /*mul=*/false, true); }
  Id mul(Id a, Id b) { return binary_elementwise(a, b, /*mul=*/true, false); }

  Id scale(Id a, T c) {
    Tensor<T> out = val(a);
    for (T& x : out.v) x *= c;
    Id o = push(std::move(out), {a});
    record({a}, o, [this, a, o, c] {
      if (!needs(a)) return;
      const auto& dO = gbuf(o);
      auto& dA = gbuf(a);
      for (std::size_t i = 0; i < dO.size(); ++i) dA[i] += c * dO[i];
    });
    return o;
  }

  Id relu(Id a) {
    return unary(
        a, [](T x) { return x > T(0) ? x : T(0); },
        [](T x, T) { return x > T(0) ? T(1) : T(0); });
  }

  Id tanh(Id a) {
    return unary(
        a, [](T x) { return std::tanh(x); }, [](T, T y) { return 1 - y * y; });
  }

  Id sigmoid(Id a) {
    return unary(
        a,
        [](T x) {
          if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
          T e = std::exp(x);
          return e / (T(1) + e);
        },
        [](T, T y) { return y * (1 - y); });
  }

  Id softplus(Id a) {
    return unary(
        a,
        [](T x) {
          // log(1 + e^x), stable for large |x|
          T m = x > T(0) ? x : T(0);
          return m + std::log1p(std::exp(-std::abs(x)));
        },
        [](T x, T) {
          if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
          T e = std::exp(x);
          return e / (T(1) + e);
        });
  }

  /// Concatenation along axis 0 (stack rows / append vectors) or axis 1
  /// (side by side). All parts must share rank and the non-axis dimension.
  Id concat(int axis, const std::vector<Id>& parts) {
    if (parts.empty()) throw ContractError("concat of zero tensors");
    int rk = val(parts[0]).rank();
    for (Id p : parts)
      if (val(p).rank() != rk)
        throw DimError("concat rank mismatch: " +
                       shape_str(val(parts[0]).shape) + " vs " +
                       shape_str(val(p).shape));
    if (rk == 1 && axis != 0)
      throw DimError("concat of vectors requires axis 0");
    if (axis != 0 && axis != 1) throw ContractError("concat axis must be 0 or 1");

    Tensor<T> out;
    if (rk == 1) {
      std::size_t total = 0;
      for (Id p : parts) total += val(p).size();
      out = Tensor<T>(Shape{static_cast<int>(total)});
      std::size_t off = 0;
      for (Id p : parts) {
        const auto& src = val(p).v;
        std::copy(src.begin(), src.end(), out.v.begin() + off);
        off += src.size();
      }
    } else if (axis == 0) {
      int c = val(parts[0]).cols(), r = 0;
      for (Id p : parts) {
        if (val(p).cols() != c)
          throw DimError("concat axis 0 column mismatch: " +
                         shape_str(val(parts[0]).shape) + " vs " +
                         shape_str(val(p).shape));
        r += val(p).rows();
      }
      out = Tensor<T>(Shape{r, c});
      std::size_t off = 0;
      for (Id p : parts) {
        const auto& src = val(p).v;
        std::copy(src.begin(), src.end(), out.v.begin() + off);
        off += src.size();
      }
    } else {
      int r = val(parts[0]).rows(), c = 0;
      for (Id p : parts) {
        if (val(p).rows() != r)
          throw DimError("concat axis 1 row mismatch: " +
                         shape_str(val(parts[0]).shape) + " vs " +
                         shape_str(val(p).shape));
        c += val(p).cols();
      }
      out = Tensor<T>(Shape{r, c});
      int coff = 0;
      for (Id p : parts) {
        const Tensor<T>& src = val(p);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < src.cols(); ++j)
            out.at(i, coff + j) = src.at(i, j);
        coff += src.cols();
      }
    }
    Id o = push(std::move(out), parts);
    std::vector<Id> ins = parts;
    record(ins, o, [this, ins, o, axis, rk] {
      const auto& dO = gbuf(o);
      if (rk == 1 || axis == 0) {
        std::size_t off = 0;
        for (Id p : ins) {
          std::size_t n = val(p).size();
          if (needs(p)) {
            auto& dP = gbuf(p);
            for (std::size_t i = 0; i < n; ++i) dP[i] += dO[off + i];
          }
          off += n;
        }
      } else {
        int r = val(o).rows(), oc = val(o).cols();
        int coff = 0;
        for (Id p : ins) {
          int pc = val(p).cols();
          if (needs(p)) {
            auto& dP = gbuf(p);
            for (int i = 0; i < r; ++i)
              for (int j = 0; j < pc; ++j)
                dP[static_cast<std::size_t>(i) * pc + j] +=
                    dO[static_cast<std::size_t>(i) * oc + coff + j];
          }
          coff += pc;
        }
      }
    });
    return o;
  }

  Id transpose(Id a) {
    const Tensor<T>& A = val(a);
    if (A.rank() != 2)
      throw DimError("transpose requires a matrix, got " + shape_str(A.shape));
    int r = A.rows(), c = A.cols();
    Tensor<T> out(Shape{c, r});
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) out.at(j, i) = A.at(i, j);
    Id o = push(std::move(out), {a});
    record({a}, o, [this, a, o, r, c] {
      if (!needs(a)) return;
      const auto& dO = gbuf(o);
      auto& dA = gbuf(a);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          dA[static_cast<std::size_t>(i) * c + j] +=
              dO[static_cast<std::size_t>(j) * r + i];
    });
    return o;
  }

  /// Extracts row `row` as a 1xC matrix.
  Id slice_row(Id a, int row) {
    const Tensor<T>& A = val(a);
    if (A.rank() != 2)
      throw DimError("slice_row requires a matrix, got " + shape_str(A.shape));
    if (row < 0 || row >= A.rows())
      throw ContractError("slice_row index " + std::to_string(row) +
                          " out of range for " + shape_str(A.shape));
    int c = A.cols();
    Tensor<T> out(Shape{1, c});
    for (int j = 0; j < c; ++j) out.v[j] = A.at(row, j);
    Id o = push(std::move(out), {a});
    record({a}, o, [this, a, o, row, c] {
      if (!needs(a)) return;
      const auto& dO = gbuf(o);
      auto& dA = gbuf(a);
      for (int j = 0; j < c; ++j)
        dA[static_cast<std::size_t>(row) * c + j] += dO[j];
    });
    return o;
  }

  /// Single element as a scalar.
  Id pick(Id a, int row, int col) {
    const Tensor<T>& A = val(a);
    if (row < 0 || row >= A.rows() || col < 0 || col >= A.cols())
      throw ContractError("pick (" + std::to_string(row) + "," +
                          std::to_string(col) + ") out of range for " +
                          shape_str(A.shape));
    Tensor<T> out = Tensor<T>::scalar(A.at(row, col));
    std::size_t flat = static_cast<std::size_t>(row) * A.cols() + col;
    Id o = push(std::move(out), {a});
    record({a}, o, [this, a, o, flat] {
      if (needs(a)) gbuf(a)[flat] += gbuf(o)[0];
    });
    return o;
  }

  /// Tiles a 1xC matrix into `copies` identical rows.
  Id repeat_rows(Id a, int copies) {
    const Tensor<T>& A = val(a);
    if (A.rank() != 2 || A.rows() != 1)
      throw DimError("repeat_rows requires a 1-row matrix, got " +
                     shape_str(A.shape));
    if (copies < 1) throw ContractError("repeat_rows requires copies >= 1");
    int c = A.cols();
    Tensor<T> out(Shape{copies, c});
    for (int i = 0; i < copies; ++i)
      for (int j = 0; j < c; ++j) out.at(i, j) = A.v[j];
    Id o = push(std::move(out), {a});
    record({a}, o, [this, a, o, copies, c] {
      if (!needs(a)) return;
      const auto& dO = gbuf(o);
      auto& dA = gbuf(a);
      for (int i = 0; i < copies; ++i)
        for (int j = 0; j < c; ++j)
          dA[j] += dO[static_cast<std::size_t>(i) * c + j];
    });
    return o;
  }

  /// Row-wise softmax with max subtraction; sums and divisions run in double
  /// so output rows sum to 1 within 1e-6 even at float32.
  Id softmax_rows(Id a) {
    const Tensor<T>& A = val(a);
    int r = A.rows(), c = A.cols();
    Tensor<T> out(A.shape);
    for (int i = 0; i < r; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < c; ++j)
        mx = std::max(mx, static_cast<double>(A.at(i, j)));
      double sum = 0;
      std::vector<double> e(c);
      for (int j = 0; j < c; ++j) {
        e[j] = std::exp(static_cast<double>(A.at(i, j)) - mx);
        sum += e[j];
      }
      for (int j = 0; j < c; ++j)
        out.v[static_cast<std::size_t>(i) * c + j] =
            static_cast<T>(e[j] / sum);
    }
    Id o = push(std::move(out), {a});
    record({a}, o, [this, a, o, r, c] {
      if (!needs(a)) return;
      const auto& dO = gbuf(o);
      const Tensor<T>& Y = val(o);
      auto& dA = gbuf(a);
      for (int i = 0; i < r; ++i) {
        double dot = 0;
        for (int j = 0; j < c; ++j) {
          std::size_t k = static_cast<std::size_t>(i) * c + j;
          dot += static_cast<double>(dO[k]) * static_cast<double>(Y.v[k]);
        }
        for (int j = 0; j < c; ++j) {
          std::size_t k = static_cast<std::size_t>(i) * c + j;
          dA[k] += static_cast<T>(
              (static_cast<double>(dO[k]) - dot) * static_cast<double>(Y.v[k]));
        }
      }
    });
    return o;
  }

  /// log sum exp over all elements, stable under large magnitudes.
  Id log_sum_exp(Id a) {
    const Tensor<T>& A = val(a);
    double mx = -std::numeric_limits<double>::infinity();
    for (T x : A.v) mx = std::max(mx, static_cast<double>(x));
    double sum = 0;
    for (T x : A.v) sum += std::exp(static_cast<double>(x) - mx);
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(mx + std::log(sum)));
    Id o = push(std::move(out), {a});
    record({a}, o, [this, a, o] {
      if (!needs(a)) return;
      double lse = static_cast<double>(val(o).v[0]);
      double d = static_cast<double>(gbuf(o)[0]);
      const Tensor<T>& A2 = val(a);
      auto& dA = gbuf(a);
      for (std::size_t i = 0; i < A2.v.size(); ++i)
        dA[i] +=
            static_cast<T>(d * std::exp(static_cast<double>(A2.v[i]) - lse));
    });
    return o;
  }

  Id sum_all(Id a) {
    const Tensor<T>& A = val(a);
    double acc = 0;
    for (T x : A.v) acc += static_cast<double>(x);
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
    Id o = push(std::move(out), {a});
    record({a}, o, [this, a, o] {
      if (!needs(a)) return;
      T d = gbuf(o)[0];
      auto& dA = gbuf(a);
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += d;
    });
    return o;
  }

  const Tensor<T>& value(Id id) const { return nodes_[id].val; }

  /// Node gradient, valid after backward(). Test and analysis hook.
  const std::vector<T>& grad(Id id) const { return grads_[id]; }

  std::size_t num_nodes() const { return nodes_.size(); }
  const std::vector<OpInfo>& ops_info() const { return op_info_; }

  void backward(Id loss) { backward_impl(loss, nullptr); }

  /// Backward with a private gradient sink keyed by parameter tensor;
  /// used by async workers that must not touch shared grad buffers.
  void backward(Id loss, GradMap& sink) { backward_impl(loss, &sink); }

 private:
  struct Node {
    Tensor<T> val;
    Tensor<T>* param = nullptr;
    std::vector<int> gather;
  };

  std::vector<Node> nodes_;
  std::vector<std::function<void()>> backward_rules_;
  std::vector<OpInfo> op_info_;
  std::vector<std::vector<T>> grads_;
  std::vector<char> needs_grad_;

  const Tensor<T>& val(Id id) const { return nodes_[id].val; }
  std::vector<T>& gbuf(Id id) { return grads_[id]; }
  bool needs(Id id) const { return needs_grad_[id] != 0; }

  Id push(Tensor<T> value, Tensor<T>* param, std::vector<int> gather,
          bool needs_grad) {
    nodes_.push_back(Node{std::move(value), param, std::move(gather)});
    needs_grad_.push_back(needs_grad ? 1 : 0);
    return static_cast<Id>(nodes_.size() - 1);
  }

  Id push(Tensor<T> value, const std::vector<Id>& ins) {
    if (finite_checks && !all_finite(value.v))
      throw ContractError("non-finite values produced at node " +
                          std::to_string(nodes_.size()));
    bool ng = false;
    for (Id i : ins) ng = ng || needs(i);
    return push(std::move(value), nullptr, {}, ng);
  }

  void record(std::vector<Id> ins, Id out, std::function<void()> rule) {
    op_info_.push_back(OpInfo{std::move(ins), out});
    backward_rules_.push_back(std::move(rule));
  }

  Id binary_elementwise(Id a, Id b, bool is_mul, bool negate_b) {
    const Tensor<T>& A = val(a);
    const Tensor<T>& B = val(b);
    if (A.shape != B.shape)
      throw DimError("elementwise shape mismatch: " + shape_str(A.shape) +
                     " vs " + shape_str(B.shape));
    Tensor<T> out(A.shape);
    for (std::size_t i = 0; i < A.v.size(); ++i)
      out.v[i] = is_mul ? A.v[i] * B.v[i]
                        : (negate_b ? A.v[i] - B.v[i] : A.v[i] + B.v[i]);
    Id o = push(std::move(out), {a, b});
    record({a, b}, o, [this, a, b, o, is_mul, negate_b] {
      const auto& dO = gbuf(o);
      if (is_mul) {
        const Tensor<T>& A2 = val(a);
        const Tensor<T>& B2 = val(b);
        if (needs(a)) {
          auto& dA = gbuf(a);
          for (std::size_t i = 0; i < dO.size(); ++i)
            dA[i] += dO[i] * B2.v[i];
        }
        if (needs(b)) {
          auto& dB = gbuf(b);
          for (std::size_t i = 0; i < dO.size(); ++i)
            dB[i] += dO[i] * A2.v[i];
        }
      } else {
        if (needs(a)) {
          auto& dA = gbuf(a);
          for (std::size_t i = 0; i < dO.size(); ++i) dA[i] += dO[i];
        }
        if (needs(b)) {
          auto& dB = gbuf(b);
          T s = negate_b ? T(-1) : T(1);
          for (std::size_t i = 0; i < dO.size(); ++i) dB[i] += s * dO[i];
        }
      }
    });
    return o;
  }

  template <typename FwdFn, typename BwdFn>
  Id unary(Id a, FwdFn fwd, BwdFn bwd) {
    Tensor<T> out = val(a);
    for (T& x : out.v) x = fwd(x);
    Id o = push(std::move(out), {a});
    record({a}, o, [this, a, o, bwd] {
      if (!needs(a)) return;
      const auto& dO = gbuf(o);
      const Tensor<T>& A2 = val(a);
      const Tensor<T>& Y = val(o);
      auto& dA = gbuf(a);
      for (std::size_t i = 0; i < dO.size(); ++i)
        dA[i] += dO[i] * bwd(A2.v[i], Y.v[i]);
    });
    return o;
  }

  void backward_impl(Id loss, GradMap* sink) {
    if (val(loss).size() != 1)
      throw ContractError("backward requires a scalar loss, got shape " +
                          shape_str(val(loss).shape));
    grads_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      grads_[i].assign(nodes_[i].val.size(), T(0));
    grads_[loss][0] = T(1);
    for (auto it = backward_rules_.rbegin(); it != backward_rules_.rend(); ++it)
      (*it)();
    // leaves: hand node gradients to their parameters
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (!n.param || !n.param->requires_grad) continue;
      std::vector<T>* dst;
      if (sink) {
        auto& buf = (*sink)[n.param];
        if (buf.size() != n.param->v.size()) buf.assign(n.param->v.size(), T(0));
        dst = &buf;
      } else {
        n.param->ensure_grad();
        dst = &n.param->g;
      }
      if (n.gather.empty()) {
        for (std::size_t k = 0; k < grads_[i].size(); ++k)
          (*dst)[k] += grads_[i][k];
      } else {
        int c = n.param->cols();
        for (std::size_t r = 0; r < n.gather.size(); ++r)
          for (int j = 0; j < c; ++j)
            (*dst)[static_cast<std::size_t>(n.gather[r]) * c + j] +=
                grads_[i][r * c + j];
      }
    }
    if (finite_checks) {
      for (const auto& gv : grads_)
        if (!all_finite(gv))
          throw ContractError("non-finite gradient produced in backward");
    }
  }
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace rasor
