#pragma once

#include <compare>
#include <map>
#include <string>

namespace pmegen {

/// A symbolic matrix size: an integer linear combination of size symbols
/// plus a constant (`m`, `m - k1`, `1`). Never evaluated numerically here.
class SymSize {
public:
  SymSize() = default;

  static SymSize symbol(const std::string& name) {
    SymSize s;
    s.terms_[name] = 1;
    return s;
  }
  static SymSize literal(int value) {
    SymSize s;
    s.constant_ = value;
    return s;
  }

  SymSize operator+(const SymSize& o) const {
    SymSize r = *this;
    for (const auto& [sym, c] : o.terms_) r.terms_[sym] += c;
    r.constant_ += o.constant_;
    r.prune();
    return r;
  }
  SymSize operator-(const SymSize& o) const {
    SymSize r = *this;
    for (const auto& [sym, c] : o.terms_) r.terms_[sym] -= c;
    r.constant_ -= o.constant_;
    r.prune();
    return r;
  }

  bool operator==(const SymSize&) const = default;
  auto operator<=>(const SymSize&) const = default;

  bool is_literal() const noexcept { return terms_.empty(); }
  bool is_one() const noexcept { return terms_.empty() && constant_ == 1; }
  int constant() const noexcept { return constant_; }
  const std::map<std::string, int>& terms() const noexcept { return terms_; }

  /// Evaluates against a symbol assignment; missing symbols count as 0.
  template <typename Map>
  int evaluate(const Map& values) const {
    int v = constant_;
    for (const auto& [sym, c] : terms_) {
      auto it = values.find(sym);
      if (it != values.end()) v += c * it->second;
    }
    return v;
  }

  /// Positive terms first (in symbol order), then negative ones.
  std::string str() const {
    std::string out;
    auto emit = [&](int coeff, const std::string& sym) {
      int mag = coeff < 0 ? -coeff : coeff;
      std::string body = sym.empty() ? std::to_string(mag)
                                     : (mag == 1 ? sym : std::to_string(mag) + sym);
      if (out.empty())
        out = (coeff < 0 ? "-" : "") + body;
      else
        out += (coeff < 0 ? " - " : " + ") + body;
    };
    for (const auto& [sym, c] : terms_)
      if (c > 0) emit(c, sym);
    if (constant_ > 0) emit(constant_, "");
    for (const auto& [sym, c] : terms_)
      if (c < 0) emit(c, sym);
    if (constant_ < 0) emit(constant_, "");
    return out.empty() ? "0" : out;
  }

private:
  void prune() {
    for (auto it = terms_.begin(); it != terms_.end();)
      it = it->second == 0 ? terms_.erase(it) : std::next(it);
  }

  std::map<std::string, int> terms_;
  int constant_ = 0;
};

struct Dimension {
  SymSize rows;
  SymSize cols;

  bool square() const { return rows == cols; }
  bool operator==(const Dimension&) const = default;
  std::string str() const { return rows.str() + " x " + cols.str(); }
};

}  // namespace pmegen
