#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aetsgd/error.hpp"
#include "aetsgd/text.hpp"

namespace aetsgd {

// ---------------------------------------------------------------------------
// Sample-size schedules: how many SGD steps make up communication round i.
// Round indices are zero-based; Linear evaluates at (round + 1) so that the
// first round is nonempty.
// ---------------------------------------------------------------------------

struct LinearSamples {
  double a = 10.0;
  double p = 1.0;
  std::uint64_t b = 0;
};

struct ConstantSamples {
  std::uint64_t s = 1;
};

// scale * (i + 1) / ln(i + 2)
struct ThetaLogSamples {
  double scale = 1.0;
};

using SampleSchedule = std::variant<LinearSamples, ConstantSamples, ThetaLogSamples>;

inline void validate(const SampleSchedule& sched) {
  std::visit(
      [](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, LinearSamples>) {
          if (!(k.a >= 0.0) || !(k.p >= 0.0) || !std::isfinite(k.a) || !std::isfinite(k.p))
            throw ValidationError("linear schedule: a and p must be finite and non-negative");
          if (k.a == 0.0 && k.b == 0)
            throw ValidationError("linear schedule: a=0 and b=0 yields empty rounds");
        } else if constexpr (std::is_same_v<K, ConstantSamples>) {
          if (k.s == 0) throw ValidationError("constant schedule: s must be positive");
        } else {
          if (!(k.scale > 0.0) || !std::isfinite(k.scale))
            throw ValidationError("thetalog schedule: scale must be positive");
        }
      },
      sched);
}

namespace detail {
inline std::uint64_t round_half_up_min1(double x) {
  const double r = std::floor(x + 0.5);
  return r < 1.0 ? 1 : static_cast<std::uint64_t>(r);
}
}  // namespace detail

inline std::uint64_t sample_size(const SampleSchedule& sched, std::uint64_t round) {
  validate(sched);
  const double i1 = static_cast<double>(round) + 1.0;
  return std::visit(
      [&](const auto& k) -> std::uint64_t {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, LinearSamples>) {
          return detail::round_half_up_min1(k.a * std::pow(i1, k.p) + static_cast<double>(k.b));
        } else if constexpr (std::is_same_v<K, ConstantSamples>) {
          return k.s;
        } else {
          return detail::round_half_up_min1(k.scale * i1 / std::log(i1 + 1.0));
        }
      },
      sched);
}

// Minimal T with sum_{j<T} sample_size(j) >= K.
inline std::uint64_t required_rounds(const SampleSchedule& sched, std::uint64_t total_iters) {
  validate(sched);
  std::uint64_t rounds = 0;
  std::uint64_t covered = 0;
  while (covered < total_iters) {
    covered += sample_size(sched, rounds);
    ++rounds;
  }
  return rounds;
}

inline std::uint64_t round_start_iteration(const SampleSchedule& sched, std::uint64_t round) {
  std::uint64_t t = 0;
  for (std::uint64_t l = 0; l < round; ++l) t += sample_size(sched, l);
  return t;
}

// ---------------------------------------------------------------------------
// Step-size schedules, indexed by cumulative iteration count t.
// ---------------------------------------------------------------------------

// eta0 / (1 + beta * sqrt(t))
struct DiminishingStep {
  double eta0 = 0.01;
  double beta = 0.01;
};

// Threshold-baseline gradient step: eta0 / (epsilon * t + 1)
struct BaselineAlphaStep {
  double eta0 = 0.01;
  double epsilon = 1e-5;
};

// Threshold-baseline consensus step: 2.252 * eta0 / (epsilon * t + 1)^(1/10)
struct BaselineBetaStep {
  double eta0 = 0.01;
  double epsilon = 1e-5;
};

using StepSchedule = std::variant<DiminishingStep, BaselineAlphaStep, BaselineBetaStep>;

inline double step_size(const StepSchedule& sched, double t) {
  return std::visit(
      [t](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DiminishingStep>) {
          return k.eta0 / (1.0 + k.beta * std::sqrt(t));
        } else if constexpr (std::is_same_v<K, BaselineAlphaStep>) {
          return k.eta0 / (k.epsilon * t + 1.0);
        } else {
          return 2.252 * k.eta0 / std::pow(k.epsilon * t + 1.0, 0.1);
        }
      },
      sched);
}

// ---------------------------------------------------------------------------
// Delay function tau(t) = sqrt(t / ln t). Below t = 3 the asymptotic form is
// meaningless (ln t <= 1), so the value is held at tau(3).
// ---------------------------------------------------------------------------

inline double tau(double t) {
  constexpr double kGuard = 3.0;
  if (t < kGuard) t = kGuard;
  return std::sqrt(t / std::log(t));
}

// ---------------------------------------------------------------------------
// Mini-grammar: linear:a,p,b | const:s | thetalog:scale
// ---------------------------------------------------------------------------

inline SampleSchedule parse_sample_schedule(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ValidationError("schedule '" + std::string(text) +
                          "': expected linear:a,p,b | const:s | thetalog:scale");
  const auto kind = text.substr(0, colon);
  const auto args = text::split(text.substr(colon + 1), ',');
  SampleSchedule out;
  if (kind == "linear") {
    if (args.size() != 3) throw ValidationError("linear schedule needs a,p,b");
    out = LinearSamples{text::parse_double(args[0], "linear a"), text::parse_double(args[1], "linear p"),
                        text::parse_u64(args[2], "linear b")};
  } else if (kind == "const") {
    if (args.size() != 1) throw ValidationError("const schedule needs s");
    out = ConstantSamples{text::parse_u64(args[0], "const s")};
  } else if (kind == "thetalog") {
    if (args.size() != 1) throw ValidationError("thetalog schedule needs scale");
    out = ThetaLogSamples{text::parse_double(args[0], "thetalog scale")};
  } else {
    throw ValidationError("unknown schedule kind '" + std::string(kind) + "'");
  }
  validate(out);
  return out;
}

inline std::string to_string(const SampleSchedule& sched) {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, LinearSamples>) {
          return "linear:" + text::format_double(k.a) + "," + text::format_double(k.p) + "," +
                 std::to_string(k.b);
        } else if constexpr (std::is_same_v<K, ConstantSamples>) {
          return "const:" + std::to_string(k.s);
        } else {
          return "thetalog:" + text::format_double(k.scale);
        }
      },
      sched);
}

}  // namespace aetsgd
