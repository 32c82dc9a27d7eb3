#include "coverage_inekf/tmvn.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <array>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "coverage_inekf/errors.hpp"

namespace coverage_inekf {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

// Wichura, AS 241 (PPND16): relative accuracy about 1e-16 over (0, 1).
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                 67265.770927008700853) * r + 45921.953931549871457) * r +
               13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r +
                 39307.89580009271061) * r + 21213.794301586595867) * r +
               5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r + 1.27045825245236838258) * r +
              3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r + 0.14810397642748007459) * r +
              0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r + 0.026532189526576123093) * r +
              0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

BoxRegion BoxRegion::unbounded(Eigen::Index n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {Eigen::VectorXd::Constant(n, -inf), Eigen::VectorXd::Constant(n, inf)};
}

bool BoxRegion::contains(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z(i) < lower(i) || z(i) > upper(i)) {
      return false;
    }
  }
  return true;
}

namespace {

constexpr int kMaxDim = 16;
constexpr std::array<double, kMaxDim> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19,
                                                 23, 29, 31, 37, 41, 43, 47, 53};

void validate_inputs(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                     const BoxRegion& box) {
  const Eigen::Index n = mean.size();
  if (n < 1 || n > kMaxDim) {
    throw std::invalid_argument("box_moments: dimension must be in [1, 16]");
  }
  if (cov.rows() != n || cov.cols() != n || box.lower.size() != n || box.upper.size() != n) {
    throw std::invalid_argument("box_moments: dimension mismatch");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isnan(box.lower(i)) || std::isnan(box.upper(i)) || box.lower(i) > box.upper(i)) {
      throw std::invalid_argument("box_moments: box requires lower <= upper");
    }
  }
}

Eigen::LLT<Eigen::MatrixXd> checked_cholesky(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !cov.allFinite()) {
    throw NumericalError("box_moments: covariance is not positive definite");
  }
  return llt;
}

// Centered, clamped and reordered problem: x = z - mean, lo <= x <= hi, x = L y.
struct Problem {
  int n = 0;
  std::array<int, kMaxDim> order{};  // position k holds original coordinate order[k]
  Eigen::MatrixXd chol;
  std::array<double, kMaxDim> lo{};
  std::array<double, kMaxDim> hi{};
  bool unbounded = true;
};

Problem prepare(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, const BoxRegion& box) {
  validate_inputs(mean, cov, box);
  Problem p;
  p.n = static_cast<int>(mean.size());
  std::array<double, kMaxDim> lo{};
  std::array<double, kMaxDim> hi{};
  std::array<double, kMaxDim> marginal{};
  for (int i = 0; i < p.n; ++i) {
    if (!(cov(i, i) > 0.0)) {
      throw NumericalError("box_moments: covariance is not positive definite");
    }
    const double sd = std::sqrt(cov(i, i));
    const double clamp = kBoundClamp * sd;
    lo[i] = std::max(box.lower(i) - mean(i), -clamp);
    hi[i] = std::min(box.upper(i) - mean(i), clamp);
    if (lo[i] > -clamp || hi[i] < clamp) {
      p.unbounded = false;
    }
    marginal[i] = normal_cdf(hi[i] / sd) - normal_cdf(lo[i] / sd);
  }
  // Most restrictive coordinates first reduces the variance of the weights.
  std::iota(p.order.begin(), p.order.begin() + p.n, 0);
  std::stable_sort(p.order.begin(), p.order.begin() + p.n,
                   [&](int a, int b) { return marginal[a] < marginal[b]; });
  Eigen::MatrixXd permuted(p.n, p.n);
  for (int r = 0; r < p.n; ++r) {
    for (int c = 0; c < p.n; ++c) {
      permuted(r, c) = cov(p.order[r], p.order[c]);
    }
    p.lo[r] = lo[p.order[r]];
    p.hi[r] = hi[p.order[r]];
  }
  p.chol = checked_cholesky(permuted).matrixL();
  return p;
}

// Draws y ~ N(0,1) truncated to [a, b] by inversion at uniform w; returns the interval mass.
constexpr double kTinyProb = std::numeric_limits<double>::min();
constexpr double kAlmostOne = 1.0 - 1e-16;

inline double conditional_draw(double a, double b, double w, double& y) {
  double mass;
  if (a > 0.0) {
    // Upper tail: work with complements to keep precision.
    const double qa = normal_cdf(-a);
    const double qb = normal_cdf(-b);
    mass = qa - qb;
    y = -normal_quantile(std::clamp(qa - w * mass, kTinyProb, kAlmostOne));
  } else {
    const double pa = normal_cdf(a);
    const double pb = normal_cdf(b);
    mass = pb - pa;
    y = normal_quantile(std::clamp(pa + w * mass, kTinyProb, kAlmostOne));
  }
  y = std::clamp(y, a, b);
  return mass;
}

struct Accumulator {
  double weight_sum = 0.0;
  std::vector<double> shift_probs;
  Eigen::VectorXd first;   // sum f x (permuted, centered)
  Eigen::MatrixXd second;  // sum f x x^T (lower triangle)
};

// kDim > 0 fixes the dimension at compile time; 0 reads it from the problem.
template <int kDim, bool kMoments>
Accumulator integrate(const Problem& p, const SamplerConfig& config, std::uint64_t seed) {
  const int n = kDim > 0 ? kDim : p.n;
  const int n_draw = kMoments ? n : n - 1;
  std::array<double, kMaxDim> gen{};
  for (int i = 0; i < n; ++i) {
    const double r = std::sqrt(kPrimes[i]);
    gen[i] = r - std::floor(r);
  }
  std::array<double, kMaxDim * kMaxDim> l{};  // row-major lower factor
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c <= r; ++c) {
      l[r * kMaxDim + c] = p.chol(r, c);
    }
  }
  std::array<double, kMaxDim> inv_diag{};
  for (int i = 0; i < n; ++i) {
    inv_diag[i] = 1.0 / l[i * kMaxDim + i];
  }
  // The first coordinate is unconditioned, so its interval is the same for every point.
  const double a0 = p.lo[0] / l[0];
  const double b0 = p.hi[0] / l[0];
  const bool upper0 = a0 > 0.0;
  const double c0a = upper0 ? normal_cdf(-a0) : normal_cdf(a0);
  const double c0b = upper0 ? normal_cdf(-b0) : normal_cdf(b0);
  const double mass0 = std::max(upper0 ? c0a - c0b : c0b - c0a, 0.0);

  Accumulator acc;
  acc.shift_probs.reserve(static_cast<std::size_t>(config.n_shifts));
  std::array<double, kMaxDim> first{};
  std::array<double, kMaxDim * kMaxDim> second{};

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::array<double, kMaxDim> shift{};
  std::array<double, kMaxDim> y{};
  std::array<double, kMaxDim> x{};
  for (int s = 0; s < config.n_shifts; ++s) {
    for (int i = 0; i < n; ++i) {
      shift[i] = unif(rng);
    }
    const int m = config.n_samples / config.n_shifts + (s < config.n_samples % config.n_shifts);
    double shift_sum = 0.0;
    for (int j = 1; j <= m && mass0 > 0.0; ++j) {
      const auto lattice = [&](int i) {
        double t = static_cast<double>(j) * gen[i] + shift[i];
        t -= static_cast<double>(static_cast<std::int64_t>(t));  // t >= 0
        return 1.0 - std::abs(2.0 * t - 1.0);  // baker's transform
      };
      double f = mass0;
      if (n_draw > 0) {
        const double w = lattice(0);
        const double v = upper0 ? -normal_quantile(std::clamp(c0a - w * mass0, kTinyProb, kAlmostOne))
                                : normal_quantile(std::clamp(c0a + w * mass0, kTinyProb, kAlmostOne));
        y[0] = std::clamp(v, a0, b0);
      }
      for (int i = 1; i < n; ++i) {
        double cond = 0.0;
        for (int k = 0; k < i; ++k) {
          cond += l[i * kMaxDim + k] * y[k];
        }
        const double a = (p.lo[i] - cond) * inv_diag[i];
        const double b = (p.hi[i] - cond) * inv_diag[i];
        double mass;
        if (i < n_draw) {
          mass = conditional_draw(a, b, lattice(i), y[i]);
        } else {
          mass = a > 0.0 ? normal_cdf(-a) - normal_cdf(-b) : normal_cdf(b) - normal_cdf(a);
        }
        f *= std::max(mass, 0.0);
        if (f <= 0.0) {
          break;
        }
      }
      if (f <= 0.0) {
        continue;
      }
      shift_sum += f;
      if constexpr (kMoments) {
        for (int r = 0; r < n; ++r) {
          double v = 0.0;
          for (int c = 0; c <= r; ++c) {
            v += l[r * kMaxDim + c] * y[c];
          }
          x[r] = v;
          first[r] += f * v;
        }
        for (int r = 0; r < n; ++r) {
          const double fx = f * x[r];
          for (int c = 0; c <= r; ++c) {
            second[r * kMaxDim + c] += fx * x[c];
          }
        }
      }
    }
    acc.weight_sum += shift_sum;
    acc.shift_probs.push_back(shift_sum / m);
  }
  if constexpr (kMoments) {
    acc.first.resize(n);
    acc.second.setZero(n, n);
    for (int r = 0; r < n; ++r) {
      acc.first(r) = first[r];
      for (int c = 0; c <= r; ++c) {
        acc.second(r, c) = second[r * kMaxDim + c];
      }
    }
  }
  return acc;
}

template <bool kMoments>
Accumulator integrate_dispatch(const Problem& p, const SamplerConfig& config, std::uint64_t seed) {
  if (config.n_samples < 100) {
    throw std::invalid_argument("box_moments: n_samples must be >= 100");
  }
  if (config.n_shifts < 1 || config.n_shifts > config.n_samples) {
    throw std::invalid_argument("box_moments: n_shifts must be in [1, n_samples]");
  }
  switch (p.n) {
    case 1:
      return integrate<1, kMoments>(p, config, seed);
    case 2:
      return integrate<2, kMoments>(p, config, seed);
    case 3:
      return integrate<3, kMoments>(p, config, seed);
    default:
      return integrate<0, kMoments>(p, config, seed);
  }
}

double shift_std_error(const std::vector<double>& probs) {
  const auto k = static_cast<double>(probs.size());
  if (probs.size() < 2) {
    return 0.0;
  }
  const double mean = std::accumulate(probs.begin(), probs.end(), 0.0) / k;
  double ss = 0.0;
  for (double v : probs) {
    ss += (v - mean) * (v - mean);
  }
  return std::sqrt(ss / (k - 1.0) / k);
}

}  // namespace

TruncatedMoments box_moments(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                             const BoxRegion& box, const SamplerConfig& config,
                             std::uint64_t seed) {
  const Problem p = prepare(mean, cov, box);
  const int n = p.n;
  TruncatedMoments out;
  if (p.unbounded) {
    out.prob = 1.0;
    out.mean = mean;
    out.second_moment = cov + mean * mean.transpose();
    return out;
  }

  const Accumulator acc = integrate_dispatch<true>(p, config, seed);
  out.prob = acc.weight_sum / config.n_samples;
  out.prob_std_error = shift_std_error(acc.shift_probs);

  Eigen::VectorXd ex = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd exx = Eigen::MatrixXd::Zero(n, n);
  if (acc.weight_sum > 0.0) {
    for (int r = 0; r < n; ++r) {
      ex(p.order[r]) = acc.first(r) / acc.weight_sum;
      for (int c = 0; c <= r; ++c) {
        const double v = acc.second(r, c) / acc.weight_sum;
        exx(p.order[r], p.order[c]) = v;
        exx(p.order[c], p.order[r]) = v;
      }
    }
  } else {
    // No resolvable mass: fall back to the box point nearest the mean.
    for (int i = 0; i < n; ++i) {
      ex(i) = std::clamp(0.0, box.lower(i) - mean(i), box.upper(i) - mean(i));
    }
    exx = ex * ex.transpose();
  }
  out.mean = mean + ex;
  out.second_moment = exx + mean * ex.transpose() + ex * mean.transpose() + mean * mean.transpose();
  if (out.prob < kProbFloor) {
    out.prob = kProbFloor;
    out.degenerate = true;
  }
  return out;
}

BoxProbability box_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                               const BoxRegion& box, const SamplerConfig& config,
                               std::uint64_t seed) {
  const Problem p = prepare(mean, cov, box);
  if (p.unbounded) {
    return {1.0, 0.0};
  }
  const Accumulator acc = integrate_dispatch<false>(p, config, seed);
  return {acc.weight_sum / config.n_samples, shift_std_error(acc.shift_probs)};
}

OracleMoments oracle_box_moments(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                 const BoxRegion& box, std::size_t n_samples,
                                 std::uint64_t seed) {
  validate_inputs(mean, cov, box);
  if (n_samples == 0) {
    throw std::invalid_argument("oracle_box_moments: n_samples must be positive");
  }
  const Eigen::Index n = mean.size();
  const Eigen::MatrixXd l = checked_cholesky(cov).matrixL();

  std::mt19937_64 rng(seed);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd e(n);
  Eigen::VectorXd z(n);
  Eigen::VectorXd in_sum = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd in_sq = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd out_sum = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd out_sq = Eigen::MatrixXd::Zero(n, n);
  std::size_t accepted = 0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      e(i) = normal(rng);
    }
    // Centered samples keep the accumulated sums well conditioned.
    z.noalias() = l.triangularView<Eigen::Lower>() * e;
    bool inside = true;
    for (Eigen::Index i = 0; i < n && inside; ++i) {
      const double zi = z(i) + mean(i);
      inside = zi >= box.lower(i) && zi <= box.upper(i);
    }
    if (inside) {
      ++accepted;
      in_sum += z;
      in_sq.selfadjointView<Eigen::Lower>().rankUpdate(z);
    } else {
      out_sum += z;
      out_sq.selfadjointView<Eigen::Lower>().rankUpdate(z);
    }
  }
  if (accepted == 0) {
    throw NumericalError("oracle_box_moments: no sample landed in the box");
  }
  in_sq = in_sq.selfadjointView<Eigen::Lower>();
  out_sq = out_sq.selfadjointView<Eigen::Lower>();

  const auto shift_moments = [&](const Eigen::VectorXd& ex, const Eigen::MatrixXd& exx,
                                 Eigen::VectorXd& m1, Eigen::MatrixXd& m2) {
    m1 = mean + ex;
    m2 = exx + mean * ex.transpose() + ex * mean.transpose() + mean * mean.transpose();
  };

  OracleMoments out;
  out.n_samples = n_samples;
  out.n_accepted = accepted;
  const double acc = static_cast<double>(accepted);
  const double p = acc / static_cast<double>(n_samples);
  out.inside.prob = p;
  out.inside.prob_std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(n_samples));
  const Eigen::VectorXd ex = in_sum / acc;
  const Eigen::MatrixXd exx = in_sq / acc;
  shift_moments(ex, exx, out.inside.mean, out.inside.second_moment);
  const Eigen::VectorXd var = (exx - ex * ex.transpose()).diagonal().cwiseMax(0.0);
  out.mean_std_error = (var / acc).cwiseSqrt();

  const std::size_t rejected = n_samples - accepted;
  if (rejected > 0) {
    const double rej = static_cast<double>(rejected);
    shift_moments(out_sum / rej, out_sq / rej, out.complement_mean, out.complement_second_moment);
  } else {
    out.complement_mean = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    out.complement_second_moment =
        Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

}  // namespace coverage_inekf
