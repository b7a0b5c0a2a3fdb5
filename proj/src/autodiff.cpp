#include "factexplain/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "factexplain/errors.hpp"

namespace fx::ad {

namespace {

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

Tape& same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw ArgumentError("operands live on different tapes");
  return *a.tape();
}

void accumulate(Matrix& dst, const Matrix& src) {
  auto& d = dst.values();
  const auto& s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("scalar() on " + v.shape_string());
  return v[0];
}

Var Tape::constant(Matrix value) { return record(std::move(value), nullptr); }

Var Tape::variable(Matrix value) {
  // A no-op backward marks the node as differentiable; gradients land in its grad slot.
  return record(std::move(value), [](Tape&, std::size_t) {});
}

Var Tape::param(Parameter& p) {
  Var v = record(p.value, nullptr);
  nodes_[v.id()].param = &p;
  return v;
}

Var Tape::record(Matrix value, BackwardFn backward) {
  nodes_.push_back(Node{std::move(value), Matrix{}, std::move(backward), nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ArgumentError("loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw ArgumentError("backward() needs a scalar loss, got " + loss.value().shape_string());
  }
  zero_grad();
  nodes_[loss.id()].grad[0] += 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) accumulate(n.param->grad, n.grad);
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (A.cols() != B.rows()) shape_fail("matmul", A, B);
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Matrix C(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A(i, p);
      if (aip == 0.0) continue;
      auto brow = B.row(p);
      auto crow = C.row(i);
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(C), [ia, ib, n, k, m](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    const Matrix& A = tp.value(ia);
    const Matrix& B = tp.value(ib);
    Matrix& gA = tp.grad(ia);
    Matrix& gB = tp.grad(ib);
    for (std::size_t i = 0; i < n; ++i) {
      auto grow = G.row(i);
      for (std::size_t p = 0; p < k; ++p) {
        auto brow = B.row(p);
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
        gA(i, p) += acc;
        const double aip = A(i, p);
        if (aip == 0.0) continue;
        auto gbrow = gB.row(p);
        for (std::size_t j = 0; j < m; ++j) gbrow[j] += aip * grow[j];
      }
    }
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  enum class Mode { Same, Row, Scalar } mode;
  if (A.same_shape(B)) {
    mode = Mode::Same;
  } else if (B.rows() == 1 && B.cols() == A.cols()) {
    mode = Mode::Row;
  } else if (B.size() == 1) {
    mode = Mode::Scalar;
  } else {
    shape_fail("add", A, B);
  }
  Matrix C = A;
  for (std::size_t i = 0; i < C.rows(); ++i) {
    for (std::size_t j = 0; j < C.cols(); ++j) {
      C(i, j) += mode == Mode::Same ? B(i, j) : mode == Mode::Row ? B(0, j) : B[0];
    }
  }
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(C), [ia, ib, mode](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    accumulate(tp.grad(ia), G);
    Matrix& gB = tp.grad(ib);
    for (std::size_t i = 0; i < G.rows(); ++i) {
      for (std::size_t j = 0; j < G.cols(); ++j) {
        if (mode == Mode::Same) {
          gB(i, j) += G(i, j);
        } else if (mode == Mode::Row) {
          gB(0, j) += G(i, j);
        } else {
          gB[0] += G(i, j);
        }
      }
    }
  });
}

Var scale(Var a, double s) {
  Matrix C = a.value();
  for (double& v : C.values()) v *= s;
  const auto ia = a.id();
  return a.tape()->record(std::move(C), [ia, s](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    Matrix& gA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) gA[i] += s * G[i];
  });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var add_scalar(Var a, double s) {
  Matrix C = a.value();
  for (double& v : C.values()) v += s;
  const auto ia = a.id();
  return a.tape()->record(std::move(C), [ia](Tape& tp, std::size_t self) {
    accumulate(tp.grad(ia), tp.grad(self));
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (!a.value().same_shape(b.value())) shape_fail("mul", a.value(), b.value());
  Matrix C = a.value();
  const Matrix& B = b.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(C), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    const Matrix& A = tp.value(ia);
    const Matrix& B = tp.value(ib);
    Matrix& gA = tp.grad(ia);
    Matrix& gB = tp.grad(ib);
    for (std::size_t i = 0; i < G.size(); ++i) {
      gA[i] += G[i] * B[i];
      gB[i] += G[i] * A[i];
    }
  });
}

Var transpose(Var a) {
  const Matrix& A = a.value();
  Matrix C(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) C(j, i) = A(i, j);
  }
  const auto ia = a.id();
  return a.tape()->record(std::move(C), [ia](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    Matrix& gA = tp.grad(ia);
    for (std::size_t i = 0; i < G.rows(); ++i) {
      for (std::size_t j = 0; j < G.cols(); ++j) gA(j, i) += G(i, j);
    }
  });
}

Var relu(Var a) {
  Matrix C = a.value();
  for (double& v : C.values()) v = v > 0.0 ? v : 0.0;
  const auto ia = a.id();
  return a.tape()->record(std::move(C), [ia](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    const Matrix& A = tp.value(ia);
    Matrix& gA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) {
      if (A[i] > 0.0) gA[i] += G[i];
    }
  });
}

Var sigmoid(Var a) {
  Matrix C = a.value();
  for (double& v : C.values()) v = sigmoid_scalar(v);
  const auto ia = a.id();
  return a.tape()->record(std::move(C), [ia](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    const Matrix& Y = tp.value(self);
    Matrix& gA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) gA[i] += G[i] * Y[i] * (1.0 - Y[i]);
  });
}

Var log(Var a, double floor) {
  Matrix C = a.value();
  for (double& v : C.values()) v = std::log(std::max(v, floor));
  const auto ia = a.id();
  return a.tape()->record(std::move(C), [ia, floor](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    const Matrix& A = tp.value(ia);
    Matrix& gA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) {
      if (A[i] > floor) gA[i] += G[i] / A[i];
    }
  });
}

namespace {
Matrix softmax_matrix(const Matrix& A) {
  Matrix Y(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto in = A.row(i);
    auto out = Y.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::exp(in[j] - mx);
      total += out[j];
    }
    for (double& v : out) v /= total;
  }
  return Y;
}

Matrix log_softmax_matrix(const Matrix& A) {
  Matrix Y(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto in = A.row(i);
    auto out = Y.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (double v : in) total += std::exp(v - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] - lse;
  }
  return Y;
}
}  // namespace

Var softmax_rows(Var a) {
  if (a.cols() == 0) throw ShapeError("softmax over zero columns");
  const auto ia = a.id();
  return a.tape()->record(softmax_matrix(a.value()), [ia](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    const Matrix& Y = tp.value(self);
    Matrix& gA = tp.grad(ia);
    for (std::size_t i = 0; i < G.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < G.cols(); ++j) dot += G(i, j) * Y(i, j);
      for (std::size_t j = 0; j < G.cols(); ++j) gA(i, j) += Y(i, j) * (G(i, j) - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  if (a.cols() == 0) throw ShapeError("log_softmax over zero columns");
  const auto ia = a.id();
  return a.tape()->record(log_softmax_matrix(a.value()), [ia](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    const Matrix& Y = tp.value(self);
    Matrix& gA = tp.grad(ia);
    for (std::size_t i = 0; i < G.rows(); ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < G.cols(); ++j) total += G(i, j);
      for (std::size_t j = 0; j < G.cols(); ++j) gA(i, j) += G(i, j) - std::exp(Y(i, j)) * total;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_cols of nothing");
  Tape* t = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.tape() != t) throw ArgumentError("operands live on different tapes");
    if (p.rows() != rows) shape_fail("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Matrix C(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Matrix& P = p.value();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < P.cols(); ++j) C(i, off + j) = P(i, j);
    }
    ids.push_back(p.id());
    offsets.push_back(off);
    off += P.cols();
  }
  return t->record(std::move(C), [ids, offsets](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Matrix& gP = tp.grad(ids[k]);
      for (std::size_t i = 0; i < gP.rows(); ++i) {
        for (std::size_t j = 0; j < gP.cols(); ++j) gP(i, j) += G(i, offsets[k] + j);
      }
    }
  });
}

Var concat_cols(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat_cols(std::span<const Var>(parts));
}

Var sum_rows(Var a) {
  const Matrix& A = a.value();
  Matrix C(1, A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) C(0, j) += A(i, j);
  }
  const auto ia = a.id();
  return a.tape()->record(std::move(C), [ia](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    Matrix& gA = tp.grad(ia);
    for (std::size_t i = 0; i < gA.rows(); ++i) {
      for (std::size_t j = 0; j < gA.cols(); ++j) gA(i, j) += G(0, j);
    }
  });
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw ShapeError("mean over zero rows");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

Var sum_all(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const auto ia = a.id();
  return a.tape()->record(Matrix(1, 1, total), [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    for (double& v : tp.grad(ia).values()) v += g;
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Matrix& A = a.value();
  Matrix C(rows.size(), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= A.rows()) throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " of " + A.shape_string());
    auto src = A.row(rows[i]);
    std::copy(src.begin(), src.end(), C.row(i).begin());
  }
  const auto ia = a.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape()->record(std::move(C), [ia, idx = std::move(idx)](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    Matrix& gA = tp.grad(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto g = G.row(i);
      auto dst = gA.row(idx[i]);
      for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
    }
  });
}

Var segment_mean_rows(Var a, std::span<const std::size_t> segment_of_row, std::size_t segments) {
  const Matrix& A = a.value();
  if (segment_of_row.size() != A.rows()) {
    throw ShapeError("segment_mean_rows: " + std::to_string(segment_of_row.size()) +
                     " segment ids for " + A.shape_string());
  }
  std::vector<double> counts(segments, 0.0);
  for (auto s : segment_of_row) {
    if (s >= segments) throw ArgumentError("segment id " + std::to_string(s) + " out of range");
    counts[s] += 1.0;
  }
  for (double c : counts) {
    if (c == 0.0) throw ShapeError("segment_mean_rows: empty segment");
  }
  Matrix C(segments, A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    auto src = A.row(r);
    auto dst = C.row(segment_of_row[r]);
    for (std::size_t c = 0; c < A.cols(); ++c) dst[c] += src[c];
  }
  for (std::size_t s = 0; s < segments; ++s) {
    for (double& v : C.row(s)) v /= counts[s];
  }
  const auto ia = a.id();
  std::vector<std::size_t> seg(segment_of_row.begin(), segment_of_row.end());
  return a.tape()->record(std::move(C), [ia, seg = std::move(seg), counts = std::move(counts)](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    Matrix& gA = tp.grad(ia);
    for (std::size_t r = 0; r < seg.size(); ++r) {
      auto g = G.row(seg[r]);
      auto dst = gA.row(r);
      const double inv = 1.0 / counts[seg[r]];
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += g[c] * inv;
    }
  });
}

Var segment_max_rows(Var a, std::span<const std::size_t> segment_of_row, std::size_t segments) {
  const Matrix& A = a.value();
  if (segment_of_row.size() != A.rows()) {
    throw ShapeError("segment_max_rows: " + std::to_string(segment_of_row.size()) +
                     " segment ids for " + A.shape_string());
  }
  const std::size_t cols = A.cols();
  // argmax row per (segment, column); first row wins ties.
  std::vector<std::size_t> arg(segments * cols, A.rows());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    const std::size_t s = segment_of_row[r];
    if (s >= segments) throw ArgumentError("segment id " + std::to_string(s) + " out of range");
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t& best = arg[s * cols + c];
      if (best == A.rows() || A(r, c) > A(best, c)) best = r;
    }
  }
  Matrix C(segments, cols);
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t r = arg[s * cols + c];
      if (r == A.rows()) throw ShapeError("segment_max_rows: empty segment");
      C(s, c) = A(r, c);
    }
  }
  const auto ia = a.id();
  return a.tape()->record(std::move(C), [ia, arg = std::move(arg), cols](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    Matrix& gA = tp.grad(ia);
    for (std::size_t k = 0; k < arg.size(); ++k) gA(arg[k], k % cols) += G[k];
  });
}

Var logit(Var p, double eps) {
  Matrix C = p.value();
  for (double& v : C.values()) {
    const double q = std::clamp(v, eps, 1.0 - eps);
    v = std::log(q) - std::log1p(-q);
  }
  const auto ip = p.id();
  return p.tape()->record(std::move(C), [ip, eps](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    const Matrix& P = tp.value(ip);
    Matrix& gP = tp.grad(ip);
    for (std::size_t i = 0; i < G.size(); ++i) {
      const double q = P[i];
      if (q > eps && q < 1.0 - eps) gP[i] += G[i] / (q * (1.0 - q));
    }
  });
}

Var binary_entropy(Var p, double eps) {
  Matrix C = p.value();
  for (double& v : C.values()) {
    const double q = std::clamp(v, eps, 1.0 - eps);
    v = -q * std::log(q) - (1.0 - q) * std::log1p(-q);
  }
  const auto ip = p.id();
  return p.tape()->record(std::move(C), [ip, eps](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    const Matrix& P = tp.value(ip);
    Matrix& gP = tp.grad(ip);
    for (std::size_t i = 0; i < G.size(); ++i) {
      const double q = P[i];
      if (q > eps && q < 1.0 - eps) gP[i] += G[i] * (std::log1p(-q) - std::log(q));
    }
  });
}

Var cross_entropy(Var logits, const Matrix& target) {
  const Matrix& L = logits.value();
  if (L.rows() == 0 || L.cols() == 0) throw ArgumentError("cross_entropy on empty logits");
  if (!L.same_shape(target)) shape_fail("cross_entropy", L, target);
  const Matrix logp = log_softmax_matrix(L);
  double total = 0.0;
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (target[i] != 0.0) total -= target[i] * logp[i];
  }
  const double rows = static_cast<double>(L.rows());
  const auto il = logits.id();
  return logits.tape()->record(Matrix(1, 1, total / rows), [il, target, logp, rows](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0] / rows;
    Matrix& gL = tp.grad(il);
    for (std::size_t i = 0; i < gL.rows(); ++i) {
      double tsum = 0.0;
      for (std::size_t j = 0; j < gL.cols(); ++j) tsum += target(i, j);
      for (std::size_t j = 0; j < gL.cols(); ++j) {
        gL(i, j) += g * (std::exp(logp(i, j)) * tsum - target(i, j));
      }
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  const Matrix& L = logits.value();
  if (L.rows() == 0 || L.cols() == 0) throw ArgumentError("cross_entropy on empty logits");
  if (targets.size() != L.rows()) throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " + L.shape_string());
  Matrix dist(L.rows(), L.cols());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= L.cols()) {
      throw ArgumentError("cross_entropy: class index " + std::to_string(targets[i]) + " out of range");
    }
    dist(i, static_cast<std::size_t>(targets[i])) = 1.0;
  }
  return cross_entropy(logits, dist);
}

Var binary_concrete_sample(Var logits, double temperature, const Matrix& u) {
  if (!(temperature > 0.0)) throw ArgumentError("concrete temperature must be positive");
  if (!logits.value().same_shape(u)) shape_fail("binary_concrete_sample", logits.value(), u);
  Matrix C = logits.value();
  for (std::size_t i = 0; i < C.size(); ++i) {
    const double noise = std::log(u[i]) - std::log1p(-u[i]);
    C[i] = std::clamp(sigmoid_scalar((C[i] + noise) / temperature), kConcreteClamp, 1.0 - kConcreteClamp);
  }
  const auto il = logits.id();
  return logits.tape()->record(std::move(C), [il, temperature](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    const Matrix& Y = tp.value(self);
    Matrix& gL = tp.grad(il);
    for (std::size_t i = 0; i < G.size(); ++i) gL[i] += G[i] * Y[i] * (1.0 - Y[i]) / temperature;
  });
}

Var binary_concrete_sample(Var logits, double temperature, Rng& rng) {
  Matrix u(logits.rows(), logits.cols());
  for (double& v : u.values()) v = rng.uniform_open();
  return binary_concrete_sample(logits, temperature, u);
}

Var normalized_propagate(Var features, Var edge_weights, const std::vector<Edge>& edges) {
  Tape& t = same_tape(features, edge_weights);
  const Matrix& H = features.value();
  const Matrix& W = edge_weights.value();
  if (W.rows() != edges.size() || W.cols() != 1) {
    throw ShapeError("normalized_propagate: weights " + W.shape_string() + " for " +
                     std::to_string(edges.size()) + " edges");
  }
  const std::size_t n = H.rows(), c = H.cols();
  std::vector<double> s(n, 1.0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (static_cast<std::size_t>(edges[e].v) >= n) throw ShapeError("normalized_propagate: edge endpoint beyond feature rows");
    s[edges[e].u] += W[e];
    s[edges[e].v] += W[e];
  }
  for (double& d : s) {
    if (!(d > 0.0)) throw ArgumentError("normalized_propagate: non-positive weighted degree");
    d = 1.0 / std::sqrt(d);
  }
  Matrix out(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    const double self_w = s[i] * s[i];
    for (std::size_t j = 0; j < c; ++j) out(i, j) = self_w * H(i, j);
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto a = static_cast<std::size_t>(edges[e].u), b = static_cast<std::size_t>(edges[e].v);
    const double coef = W[e] * s[a] * s[b];
    for (std::size_t j = 0; j < c; ++j) {
      out(a, j) += coef * H(b, j);
      out(b, j) += coef * H(a, j);
    }
  }
  const auto ih = features.id(), iw = edge_weights.id();
  return t.record(std::move(out), [ih, iw, s, edges, n, c](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    const Matrix& H = tp.value(ih);
    const Matrix& W = tp.value(iw);
    Matrix& gH = tp.grad(ih);
    Matrix& gW = tp.grad(iw);
    std::vector<double> ds(n, 0.0);
    auto dot = [&](std::size_t x, std::size_t y) {
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) acc += G(x, j) * H(y, j);
      return acc;
    };
    for (std::size_t i = 0; i < n; ++i) {
      const double self_w = s[i] * s[i];
      for (std::size_t j = 0; j < c; ++j) gH(i, j) += self_w * G(i, j);
      ds[i] += 2.0 * s[i] * dot(i, i);
    }
    std::vector<double> direct(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto a = static_cast<std::size_t>(edges[e].u), b = static_cast<std::size_t>(edges[e].v);
      const double w = W[e];
      const double coef = w * s[a] * s[b];
      for (std::size_t j = 0; j < c; ++j) {
        gH(b, j) += coef * G(a, j);
        gH(a, j) += coef * G(b, j);
      }
      const double cross = dot(a, b) + dot(b, a);
      direct[e] = s[a] * s[b] * cross;
      ds[a] += w * s[b] * cross;
      ds[b] += w * s[a] * cross;
    }
    // d s_i / d deg_i = -s_i^3 / 2, and d deg / d w_e = 1 at both endpoints.
    for (std::size_t i = 0; i < n; ++i) ds[i] *= -0.5 * s[i] * s[i] * s[i];
    for (std::size_t e = 0; e < edges.size(); ++e) {
      gW[e] += direct[e] + ds[edges[e].u] + ds[edges[e].v];
    }
  });
}

Var weighted_degree(Var edge_weights, const std::vector<Edge>& edges, std::size_t node_count) {
  const Matrix& W = edge_weights.value();
  if (W.rows() != edges.size() || W.cols() != 1) {
    throw ShapeError("weighted_degree: weights " + W.shape_string() + " for " + std::to_string(edges.size()) +
                     " edges");
  }
  Matrix D(node_count, 1);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto u = static_cast<std::size_t>(edges[e].u), v = static_cast<std::size_t>(edges[e].v);
    if (u >= node_count || v >= node_count) throw ArgumentError("weighted_degree: edge outside node range");
    D[u] += W[e];
    D[v] += W[e];
  }
  const auto iw = edge_weights.id();
  return edge_weights.tape()->record(std::move(D), [iw, edges](Tape& tp, std::size_t self) {
    const Matrix& G = tp.grad(self);
    Matrix& gW = tp.grad(iw);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      gW[e] += G[static_cast<std::size_t>(edges[e].u)] + G[static_cast<std::size_t>(edges[e].v)];
    }
  });
}

Var activate(Var x, Activation act) {
  switch (act) {
    case Activation::Relu: return relu(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::None: break;
  }
  return x;
}

DenseLayer DenseLayer::xavier(std::string name, std::size_t in, std::size_t out, Activation act, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix w(in, out);
  for (double& v : w.values()) v = rng.uniform(-limit, limit);
  DenseLayer layer;
  layer.weight = Parameter(name + ".weight", std::move(w));
  layer.bias = Parameter(name + ".bias", Matrix(1, out));
  layer.activation = act;
  return layer;
}

Var DenseLayer::forward(Tape& tape, Var x) {
  return activate(add(matmul(x, tape.param(weight)), tape.param(bias)), activation);
}

Var DenseLayer::forward_frozen(Tape& tape, Var x) const {
  return activate(add(matmul(x, tape.constant(weight.value)), tape.constant(bias.value)), activation);
}

Mlp Mlp::make(const std::string& name, const std::vector<std::size_t>& sizes, Activation hidden_act,
              Activation out_act, Rng& rng) {
  if (sizes.size() < 2) throw ArgumentError("MLP needs at least input and output sizes");
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const bool last = i + 2 == sizes.size();
    mlp.layers.push_back(DenseLayer::xavier(name + "." + std::to_string(i), sizes[i], sizes[i + 1],
                                            last ? out_act : hidden_act, rng));
  }
  return mlp;
}

Var Mlp::forward(Tape& tape, Var x) {
  for (auto& l : layers) x = l.forward(tape, x);
  return x;
}

Var Mlp::forward_frozen(Tape& tape, Var x) const {
  for (const auto& l : layers) x = l.forward_frozen(tape, x);
  return x;
}

void Mlp::collect(std::vector<Parameter*>& out) {
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
}

void Mlp::collect(std::vector<const Parameter*>& out) const {
  for (const auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
}

void Adam::step(std::span<Parameter* const> params) {
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) throw TrainingError("non-finite gradient for parameter " + p->name);
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (Parameter* p : params) {
    auto& mom = moments_[p->name];
    if (!mom.m.same_shape(p->value)) {
      mom.m = Matrix(p->value.rows(), p->value.cols());
      mom.v = Matrix(p->value.rows(), p->value.cols());
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * g;
      mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * g * g;
      const double mhat = mom.m[i] / c1;
      const double vhat = mom.v[i] / c2;
      p->value[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
    p->zero_grad();
  }
}

nlohmann::json parameters_to_json(std::span<const Parameter* const> params) {
  nlohmann::json doc = nlohmann::json::object();
  for (const Parameter* p : params) {
    doc[p->name] = {{"shape", {p->value.rows(), p->value.cols()}}, {"values", p->value.values()}};
  }
  return doc;
}

void parameters_from_json(const nlohmann::json& doc, std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (!doc.contains(p->name)) throw ParseError("parameter '" + p->name + "' missing from checkpoint");
    const auto& entry = doc.at(p->name);
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[0] != p->value.rows() || shape[1] != p->value.cols()) {
      throw ParseError("parameter '" + p->name + "' has shape mismatch in checkpoint");
    }
    p->value = Matrix(shape[0], shape[1], entry.at("values").get<std::vector<double>>());
    p->zero_grad();
  }
}

}  // namespace fx::ad
