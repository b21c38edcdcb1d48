#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "palm/measure.hpp"

namespace palm {

inline void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

inline std::string encode_element(const Group& g, const GroupElement& x) {
  std::string s;
  if (g.is_finite()) {
    s += 'i';
    s += std::to_string(x.index);
  } else {
    s += 'p';
    for (double c : x.coords) {
      s += ',';
      append_double(s, c);
    }
  }
  return s;
}

inline std::string encode_measure(const Measure& m) {
  std::string s;
  if (std::holds_alternative<PointMeasure>(m)) {
    const auto& pm = std::get<PointMeasure>(m);
    s += "P[";
    for (const auto& a : pm.atoms()) {
      s += encode_element(pm.group(), a.location);
      s += ':';
      append_double(s, a.weight);
      s += ';';
    }
    s += ']';
  } else {
    const auto& dm = std::get<DensityMeasure>(m);
    s += "D[";
    for (int n : dm.shape()) {
      s += std::to_string(n);
      s += 'x';
    }
    s += '|';
    for (double v : dm.values()) {
      append_double(s, v);
      s += ';';
    }
    s += ']';
  }
  return s;
}

inline std::string encode_mark(const Group& g, const Mark& mark) {
  switch (mark.kind()) {
    case Mark::Kind::Empty:
      return "E";
    case Mark::Kind::Scalar: {
      std::string s = "S:";
      append_double(s, mark.scalar_value());
      return s;
    }
    case Mark::Kind::PointPattern:
      return "M" + encode_measure(Measure(mark.pattern()));
    case Mark::Kind::GridField:
      return "F" + encode_measure(Measure(mark.field()));
    case Mark::Kind::WindowBox: {
      std::string s = "W[";
      for (double v : mark.window().lo) {
        append_double(s, v);
        s += ',';
      }
      s += '|';
      for (double v : mark.window().hi) {
        append_double(s, v);
        s += ',';
      }
      s += ']';
      return s;
    }
    case Mark::Kind::Tuple: {
      std::string s = "T(";
      for (const auto& p : mark.parts()) {
        s += encode_mark(g, p);
        s += ',';
      }
      s += ')';
      return s;
    }
  }
  throw std::logic_error("encode_mark: unknown kind");
}

/// Canonical byte encoding of a configuration, used as the outcome key in
/// exact finite-distribution arithmetic. Exact for finite groups.
inline std::string config_key(const Configuration& c) {
  return encode_mark(c.group(), c.mark) + "|" + encode_measure(c.measure);
}

/// A finitely supported distribution over configurations, canonicalized by
/// configuration key.
class ConfigDist {
 public:
  void add(const Configuration& c, double p) {
    if (p < 0.0) throw std::invalid_argument("config dist: negative probability");
    if (p == 0.0) return;
    auto key = config_key(c);
    auto it = mass_.find(key);
    if (it == mass_.end())
      mass_.emplace(std::move(key), Entry{c, p});
    else
      it->second.prob += p;
  }

  double total() const {
    double t = 0.0;
    for (const auto& [k, e] : mass_) t += e.prob;
    return t;
  }

  void normalize() {
    const double t = total();
    if (t <= 0.0) throw std::invalid_argument("config dist: zero total mass");
    for (auto& [k, e] : mass_) e.prob /= t;
  }

  std::size_t support_size() const { return mass_.size(); }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [k, e] : mass_) fn(e.config, e.prob);
  }

  /// Pushforward under an arbitrary configuration map.
  template <typename Fn>
  ConfigDist transform(Fn&& fn) const {
    ConfigDist out;
    for (const auto& [k, e] : mass_) out.add(fn(e.config), e.prob);
    return out;
  }

  double prob_of(const Configuration& c) const {
    auto it = mass_.find(config_key(c));
    return it == mass_.end() ? 0.0 : it->second.prob;
  }

  static double tv(const ConfigDist& a, const ConfigDist& b) {
    double acc = 0.0;
    auto ia = a.mass_.begin();
    auto ib = b.mass_.begin();
    while (ia != a.mass_.end() || ib != b.mass_.end()) {
      if (ib == b.mass_.end() || (ia != a.mass_.end() && ia->first < ib->first)) {
        acc += ia->second.prob;
        ++ia;
      } else if (ia == a.mass_.end() || ib->first < ia->first) {
        acc += ib->second.prob;
        ++ib;
      } else {
        acc += std::abs(ia->second.prob - ib->second.prob);
        ++ia;
        ++ib;
      }
    }
    return acc / 2.0;
  }

 private:
  struct Entry {
    Configuration config;
    double prob;
  };
  std::map<std::string, Entry> mass_;
};

/// Half L1 distance between two finitely supported distributions given as
/// key -> probability maps. Zero iff equal; one iff disjoint supports.
inline double tv_distance_exact(const std::map<std::string, double>& p,
                                const std::map<std::string, double>& q) {
  double acc = 0.0;
  auto ip = p.begin();
  auto iq = q.begin();
  while (ip != p.end() || iq != q.end()) {
    if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
      acc += std::abs(ip->second);
      ++ip;
    } else if (ip == p.end() || iq->first < ip->first) {
      acc += std::abs(iq->second);
      ++iq;
    } else {
      acc += std::abs(ip->second - iq->second);
      ++ip;
      ++iq;
    }
  }
  return acc / 2.0;
}

}  // namespace palm
