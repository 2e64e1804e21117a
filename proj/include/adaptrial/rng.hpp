#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace adaptrial {

/// Identifier recorded in trial traces so byte-exact reproducibility is
/// checkable: engine / uniform mapping / Gaussian transform.
inline constexpr std::string_view kRngAlgorithmId =
    "mt19937_64;u01=(x>>11)*2^-53;normal=icdf-as241";

/// splitmix64 output function. Used as a key-derivation step, not as the
/// trial generator itself.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and salt words,
/// e.g. (replication index, design code). Pure and order-sensitive.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> salts) {
  std::uint64_t s = master;
  std::uint64_t out = splitmix64(s);
  for (std::uint64_t w : salts) {
    s ^= w + 0x9E3779B97F4A7C15ull + (s << 6) + (s >> 2);
    out = splitmix64(s);
  }
  return out;
}

/// Inverse standard normal CDF, algorithm AS 241 (PPND16).
/// Relative accuracy around 1e-16 on (0,1).
inline double normal_quantile(double p) {
  const double q = p - 0.5;
  if (q > -0.425 && q < 0.425) {
    const double r = 0.180625 - q * q;
    const double num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                              6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                            1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                          1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                          4.2313330701600911252e1) * r + 1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    const double num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                          2.05319162663775882187e0) * r + 1.0);
    x = num / den;
  } else {
    r -= 5.0;
    const double num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                            1.48753612908506148525e-2) * r + 5.99832206555887937690e-1) * r +
                          1.36929880922735805310e0) * r + 1.0);
    x = num / den;
  }
  return (q < 0.0) ? -x : x;
}

/// Deterministic random stream for one trial or replication.
///
/// The engine is std::mt19937_64 (exactly specified by the standard),
/// uniforms map the top 53 bits to [0,1), and Gaussians apply the inverse
/// CDF to one uniform each, so every draw consumes exactly one engine step.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0,1); strictly below 1.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via inverse CDF; the uniform is nudged off 0 to stay
  /// inside the open interval.
  double gaussian() {
    double u = uniform01();
    if (u <= 0.0) u = 0x1.0p-53;
    return normal_quantile(u);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace adaptrial
