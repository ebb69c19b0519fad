#pragma once

#include <cerrno>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "relaytree/error.hpp"

namespace relaytree {

/// Probability that a node fails or its uplink erases the message:
/// n + l - n*l.
template <typename Real>
inline Real local_failure_prob(Real node_failure, Real link_erasure) {
  detail::require_probability(node_failure, "node failure probability");
  detail::require_probability(link_erasure, "link erasure probability");
  return node_failure + link_erasure - node_failure * link_erasure;
}

/// Per-level (node failure, link erasure) probabilities.
struct LevelFailure {
  long double node = 0.0L;
  long double link = 0.0L;
};

/// Local failure probabilities p_0, p_1, ... for every level of the tree.
///
/// Generated schedules (constant, quadratic, geometric) are unbounded.
/// List schedules (explicit, raw) cover exactly as many levels as they have
/// entries. Values are held in long double so that rapidly decaying
/// sequences such as p_{k+1} = p_k^2 stay representable for a few more
/// levels than double allows; log2_p() is exact for generated schedules.
class FailureSchedule {
 public:
  struct Constant { long double p; };
  struct Quadratic { long double p0; };
  struct Geometric { long double p0; long double ratio; };
  struct Explicit { std::vector<long double> values; };
  struct Raw { std::vector<LevelFailure> levels; };
  using Generator = std::variant<Constant, Quadratic, Geometric, Explicit, Raw>;

  static FailureSchedule none() { return constant(0.0L); }

  static FailureSchedule constant(long double p) {
    detail::require_probability(p, "constant schedule p");
    return FailureSchedule(Constant{p});
  }

  static FailureSchedule quadratic(long double p0) {
    detail::require_probability(p0, "quadratic schedule p0");
    return FailureSchedule(Quadratic{p0});
  }

  static FailureSchedule geometric(long double p0, long double ratio) {
    detail::require_probability(p0, "geometric schedule p0");
    detail::require_probability(ratio, "geometric schedule ratio");
    return FailureSchedule(Geometric{p0, ratio});
  }

  static FailureSchedule from_values(std::vector<long double> values) {
    if (values.empty()) throw InvalidArgument("explicit schedule needs at least one level");
    for (long double v : values) detail::require_probability(v, "explicit schedule entry");
    return FailureSchedule(Explicit{std::move(values)});
  }

  static FailureSchedule from_raw(std::vector<LevelFailure> levels) {
    if (levels.empty()) throw InvalidArgument("raw schedule needs at least one level");
    for (const auto& lv : levels) {
      detail::require_probability(lv.node, "raw schedule node failure");
      detail::require_probability(lv.link, "raw schedule link erasure");
    }
    return FailureSchedule(Raw{std::move(levels)});
  }

  const Generator& generator() const { return generator_; }

  /// Highest level with a defined p_k; nullopt for unbounded generators.
  std::optional<std::size_t> last_level() const {
    if (const auto* e = std::get_if<Explicit>(&generator_)) return e->values.size() - 1;
    if (const auto* r = std::get_if<Raw>(&generator_)) return r->levels.size() - 1;
    return std::nullopt;
  }

  bool covers(std::size_t level) const {
    const auto last = last_level();
    return !last || level <= *last;
  }

  long double p(std::size_t k) const {
    require_covered(k);
    return std::visit(
        [k](const auto& g) -> long double {
          using G = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<G, Constant>) {
            return g.p;
          } else if constexpr (std::is_same_v<G, Quadratic>) {
            long double v = g.p0;
            for (std::size_t i = 0; i < k && v > 0.0L && v < 1.0L; ++i) v *= v;
            return v;
          } else if constexpr (std::is_same_v<G, Geometric>) {
            return g.p0 * std::pow(g.ratio, static_cast<long double>(k));
          } else if constexpr (std::is_same_v<G, Explicit>) {
            return g.values[k];
          } else {
            return local_failure_prob(g.levels[k].node, g.levels[k].link);
          }
        },
        generator_);
  }

  /// Split of p_k into node failure and link erasure. Schedules given only
  /// as p_k attribute everything to the link.
  LevelFailure split(std::size_t k) const {
    if (const auto* r = std::get_if<Raw>(&generator_)) {
      require_covered(k);
      return r->levels[k];
    }
    return LevelFailure{0.0L, p(k)};
  }

  /// log2(p_k), computed without forming p_k for generated schedules.
  long double log2_p(std::size_t k) const {
    require_covered(k);
    constexpr long double neg_inf = -std::numeric_limits<long double>::infinity();
    if (const auto* qd = std::get_if<Quadratic>(&generator_)) {
      if (qd->p0 == 0.0L) return neg_inf;
      return std::ldexp(std::log2(qd->p0), static_cast<int>(k));
    }
    if (const auto* gm = std::get_if<Geometric>(&generator_)) {
      if (gm->p0 == 0.0L || (gm->ratio == 0.0L && k > 0)) return neg_inf;
      return std::log2(gm->p0) + static_cast<long double>(k) * std::log2(gm->ratio);
    }
    return std::log2(p(k));
  }

  /// True when p_{k+1} <= p_k for every k < up_to.
  bool non_increasing(std::size_t up_to) const {
    for (std::size_t k = 0; k < up_to; ++k) {
      if (log2_p(k + 1) > log2_p(k)) return false;
    }
    return true;
  }

  /// Textual form accepted by parse_schedule().
  std::string to_string() const {
    std::ostringstream os;
    os.precision(std::numeric_limits<long double>::max_digits10);
    std::visit(
        [&os](const auto& g) {
          using G = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<G, Constant>) {
            os << "constant:p=" << g.p;
          } else if constexpr (std::is_same_v<G, Quadratic>) {
            os << "quadratic:p0=" << g.p0;
          } else if constexpr (std::is_same_v<G, Geometric>) {
            os << "geometric:p0=" << g.p0 << ",r=" << g.ratio;
          } else if constexpr (std::is_same_v<G, Explicit>) {
            os << "explicit:";
            for (std::size_t i = 0; i < g.values.size(); ++i) os << (i ? "," : "") << g.values[i];
          } else {
            os << "raw:";
            for (std::size_t i = 0; i < g.levels.size(); ++i) {
              os << (i ? ";" : "") << '(' << g.levels[i].node << ',' << g.levels[i].link << ')';
            }
          }
        },
        generator_);
    return os.str();
  }

 private:
  explicit FailureSchedule(Generator g) : generator_(std::move(g)) {}

  void require_covered(std::size_t k) const {
    if (!covers(k)) {
      throw InvalidArgument("schedule defines levels 0.." + std::to_string(*last_level()) +
                            " but level " + std::to_string(k) + " was requested");
    }
  }

  Generator generator_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline long double parse_number(std::string_view text) {
  const std::string s(trim(text));
  if (s.empty()) throw InvalidArgument("expected a number, got an empty field");
  char* end = nullptr;
  errno = 0;
  const long double v = std::strtold(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw InvalidArgument("not a number: '" + s + "'");
  // Underflow to a denormal or zero is fine for probabilities.
  if (errno == ERANGE && std::fabs(v) > 1.0L) throw InvalidArgument("number out of range: '" + s + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

// "p0=0.1,r=0.5" -> value for each expected key, in order.
inline std::vector<long double> parse_keyed(std::string_view body, std::initializer_list<std::string_view> keys) {
  const auto fields = split(body, ',');
  if (fields.size() != keys.size()) {
    throw InvalidArgument("expected " + std::to_string(keys.size()) + " key=value field(s) in '" +
                          std::string(body) + "'");
  }
  std::vector<long double> out;
  auto key = keys.begin();
  for (const auto field : fields) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos || trim(field.substr(0, eq)) != *key) {
      throw InvalidArgument("expected '" + std::string(*key) + "=<value>', got '" + std::string(field) + "'");
    }
    out.push_back(parse_number(field.substr(eq + 1)));
    ++key;
  }
  return out;
}

}  // namespace detail

/// Parses the schedule grammar:
///   none
///   constant:p=0.1
///   quadratic:p0=0.1
///   geometric:p0=0.1,r=0.5
///   explicit:0.1,0.01,0.0001
///   raw:(n,l);(n,l);...
inline FailureSchedule parse_schedule(std::string_view text) {
  text = detail::trim(text);
  if (text == "none" || text == "zero") return FailureSchedule::none();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw InvalidArgument("schedule needs '<kind>:<params>', got '" + std::string(text) + "'");
  const auto kind = detail::trim(text.substr(0, colon));
  const auto body = detail::trim(text.substr(colon + 1));

  if (kind == "constant") return FailureSchedule::constant(detail::parse_keyed(body, {"p"})[0]);
  if (kind == "quadratic") return FailureSchedule::quadratic(detail::parse_keyed(body, {"p0"})[0]);
  if (kind == "geometric") {
    const auto v = detail::parse_keyed(body, {"p0", "r"});
    return FailureSchedule::geometric(v[0], v[1]);
  }
  if (kind == "explicit") {
    std::vector<long double> values;
    for (const auto field : detail::split(body, ',')) values.push_back(detail::parse_number(field));
    return FailureSchedule::from_values(std::move(values));
  }
  if (kind == "raw") {
    std::vector<LevelFailure> levels;
    for (auto item : detail::split(body, ';')) {
      item = detail::trim(item);
      if (item.size() < 2 || item.front() != '(' || item.back() != ')') {
        throw InvalidArgument("raw schedule entries look like (n,l), got '" + std::string(item) + "'");
      }
      const auto pair = detail::split(item.substr(1, item.size() - 2), ',');
      if (pair.size() != 2) throw InvalidArgument("raw schedule entry needs exactly two values: '" + std::string(item) + "'");
      levels.push_back({detail::parse_number(pair[0]), detail::parse_number(pair[1])});
    }
    return FailureSchedule::from_raw(std::move(levels));
  }
  throw InvalidArgument("unknown schedule kind '" + std::string(kind) + "'");
}

}  // namespace relaytree
