#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace levyflow::ad {

class Tape;

/// Scalar recorded on a Tape.  Copies are cheap handles to the same node.
class Var {
 public:
  Var() = default;
  double value() const noexcept { return value_; }
  std::uint32_t index() const noexcept { return index_; }
  Tape* tape() const noexcept { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index, double value) : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
  double value_ = 0.0;
};

/// Wengert list with at most two parents per node.  Each node stores the local
/// partial derivatives; `gradient` performs one reverse sweep.
class Tape {
 public:
  static constexpr std::uint32_t kNone = ~std::uint32_t{0};

  Var variable(double value) { return push(value, kNone, 0.0, kNone, 0.0); }

  Var unary(const Var& a, double value, double da) { return push(value, a.index_, da, kNone, 0.0); }

  Var binary(const Var& a, const Var& b, double value, double da, double db) {
    return push(value, a.index_, da, b.index_, db);
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  /// Adjoints d(output)/d(node) for every node on the tape.
  std::vector<double> gradient(const Var& output) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[output.index_] = 1.0;
    for (std::size_t i = output.index_ + 1; i-- > 0;) {
      const double a = adj[i];
      if (a == 0.0) continue;
      const Node& n = nodes_[i];
      if (n.parent[0] != kNone) adj[n.parent[0]] += a * n.partial[0];
      if (n.parent[1] != kNone) adj[n.parent[1]] += a * n.partial[1];
    }
    return adj;
  }

 private:
  struct Node {
    std::uint32_t parent[2];
    double partial[2];
  };

  Var push(double value, std::uint32_t pa, double da, std::uint32_t pb, double db) {
    const auto idx = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{{pa, pb}, {da, db}});
    return Var(this, idx, value);
  }

  std::vector<Node> nodes_;
};

inline Var operator+(const Var& a, const Var& b) { return a.tape()->binary(a, b, a.value() + b.value(), 1.0, 1.0); }
inline Var operator-(const Var& a, const Var& b) { return a.tape()->binary(a, b, a.value() - b.value(), 1.0, -1.0); }
inline Var operator*(const Var& a, const Var& b) {
  return a.tape()->binary(a, b, a.value() * b.value(), b.value(), a.value());
}
inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.value();
  const double q = a.value() * inv;
  return a.tape()->binary(a, b, q, inv, -q * inv);
}
inline Var operator-(const Var& a) { return a.tape()->unary(a, -a.value(), -1.0); }

inline Var operator+(const Var& a, double b) { return a.tape()->unary(a, a.value() + b, 1.0); }
inline Var operator+(double a, const Var& b) { return b + a; }
inline Var operator-(const Var& a, double b) { return a.tape()->unary(a, a.value() - b, 1.0); }
inline Var operator-(double a, const Var& b) { return b.tape()->unary(b, a - b.value(), -1.0); }
inline Var operator*(const Var& a, double b) { return a.tape()->unary(a, a.value() * b, b); }
inline Var operator*(double a, const Var& b) { return b * a; }
inline Var operator/(const Var& a, double b) { return a * (1.0 / b); }
inline Var operator/(double a, const Var& b) {
  const double q = a / b.value();
  return b.tape()->unary(b, q, -q / b.value());
}

inline Var log(const Var& a) { return a.tape()->unary(a, std::log(a.value()), 1.0 / a.value()); }
inline Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return a.tape()->unary(a, e, e);
}
inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.value());
  return a.tape()->unary(a, s, 0.5 / s);
}
/// ln(1 + e^a), stable for large |a|.
inline Var softplus(const Var& a) {
  const double v = a.value();
  const double sp = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  const double sig = 1.0 / (1.0 + std::exp(-v));
  return a.tape()->unary(a, sp, sig);
}

// Value-level helpers so templated numeric code can treat double and Var alike.
inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

inline double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

}  // namespace levyflow::ad
