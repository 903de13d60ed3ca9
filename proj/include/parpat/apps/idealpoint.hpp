#ifndef PARPAT_APPS_IDEALPOINT_HPP
#define PARPAT_APPS_IDEALPOINT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "parpat/errors.hpp"
#include "parpat/payload.hpp"
#include "parpat/taskmap.hpp"

namespace parpat::idealpoint {

inline constexpr std::int8_t kMissing = -1;

/// Roll-call votes: rows are legislators, columns are votes, entries are
/// 1 (Yea), 0 (Nay) or -1 (missing).
struct RollCallMatrix {
  int n = 0;  // legislators
  int m = 0;  // votes
  std::vector<std::int8_t> y;  // row-major n x m

  std::int8_t vote(int i, int j) const { return y[static_cast<std::size_t>(i) * m + j]; }

  void validate() const {
    if (n < 2 || m < 2) throw std::invalid_argument("roll call needs n >= 2 and m >= 2");
    if (y.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(m))
      throw std::invalid_argument("roll call matrix shape mismatch");
    for (int i = 0; i < n; ++i) {
      bool any = false;
      for (int j = 0; j < m; ++j) {
        const auto v = vote(i, j);
        if (v != 0 && v != 1 && v != kMissing)
          throw std::invalid_argument("roll call entries must be 0, 1 or missing");
        any = any || v != kMissing;
      }
      if (!any)
        throw std::invalid_argument("legislator " + std::to_string(i) + " has no observed votes");
    }
  }
};

struct GibbsConfig {
  int iterations = 2000;
  int burn_in = 500;
  int thin = 1;
  int dims = 1;
  std::uint64_t seed = 0;
  double x_prior_sd = 1.0;
  double item_prior_sd = 5.0;

  void validate() const {
    if (iterations <= 0 || burn_in < 0 || thin <= 0 || dims < 1)
      throw std::invalid_argument("bad Gibbs config");
    if (burn_in >= iterations) throw std::invalid_argument("burn_in must be < iterations");
  }
};

struct ChainState {
  Eigen::MatrixXd x;      // n x d
  Eigen::MatrixXd beta;   // m x d
  Eigen::VectorXd alpha;  // m
  Eigen::MatrixXd ystar;  // n x m
};

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Inverse standard-normal CDF (Acklam's rational approximation, relative
/// error below 1.15e-9).
inline double norm_ppf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("norm_ppf needs p in (0, 1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - plow) {
    q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

/// N(mean, 1) truncated to the positive half-line when positive_side, else to
/// the negative half-line. Inverse CDF in the bulk; exponential-proposal
/// rejection in the far tail (standardized bound beyond 5) where the inverse
/// CDF loses precision.
template <class RNG>
double sample_trunc_normal(double mean, bool positive_side, RNG& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Standardize: for the positive side we need z > -mean; for the negative
  // side, z < -mean, i.e. -z > mean.
  const double bound = positive_side ? -mean : mean;
  if (bound <= 5.0) {
    const double plo = norm_cdf(bound);
    double u;
    do {
      u = plo + (1.0 - plo) * unif(rng);
    } while (!(u > 0.0 && u < 1.0));
    const double z = norm_ppf(u);
    return positive_side ? mean + z : mean - z;
  }
  // Robert's exponential rejection for z > bound >> 0.
  const double lambda = 0.5 * (bound + std::sqrt(bound * bound + 4.0));
  while (true) {
    const double z = bound - std::log(unif(rng)) / lambda;
    const double rho = std::exp(-0.5 * (z - lambda) * (z - lambda));
    if (unif(rng) <= rho) return positive_side ? mean + z : mean - z;
  }
}

/// Step (i): latent utilities. Observed Yea votes draw from N(beta_j.x_i -
/// alpha_j, 1) truncated positive, Nay truncated negative, missing entries
/// untruncated.
template <class RNG>
void sample_ystar(ChainState& state, const RollCallMatrix& data, RNG& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < data.n; ++i) {
    for (int j = 0; j < data.m; ++j) {
      const double mean = state.beta.row(j).dot(state.x.row(i)) - state.alpha(j);
      const auto v = data.vote(i, j);
      if (v == kMissing)
        state.ystar(i, j) = mean + unit(rng);
      else
        state.ystar(i, j) = sample_trunc_normal(mean, v == 1, rng);
    }
  }
}

namespace detail {

/// One multivariate-normal draw N(mu, Sigma) with Sigma given through the
/// Cholesky factor of the precision.
template <class RNG>
Eigen::VectorXd mvn_from_precision(const Eigen::MatrixXd& precision, const Eigen::VectorXd& rhs,
                                   RNG& rng) {
  const Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("singular posterior precision in conjugate update");
  const Eigen::VectorXd mu = llt.solve(rhs);
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd z(rhs.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = unit(rng);
  // x = mu + L^{-T} z has covariance (L L^T)^{-1} = precision^{-1}.
  return mu + llt.matrixU().solve(z);
}

}  // namespace detail

/// Step (ii): per-vote joint conjugate draw of (beta_j, alpha_j) from the
/// regression of ystar_.j on the design [x, -1] with unit noise and a
/// N(0, item_prior_sd^2 I) prior.
template <class RNG>
void sample_item_params(ChainState& state, const RollCallMatrix& data, const GibbsConfig& cfg,
                        RNG& rng) {
  const int d = cfg.dims;
  Eigen::MatrixXd design(data.n, d + 1);
  design.leftCols(d) = state.x;
  design.col(d).setConstant(-1.0);
  const Eigen::MatrixXd xtx = design.transpose() * design;
  Eigen::MatrixXd precision = xtx;
  precision.diagonal().array() += 1.0 / (cfg.item_prior_sd * cfg.item_prior_sd);
  for (int j = 0; j < data.m; ++j) {
    const Eigen::VectorXd rhs = design.transpose() * state.ystar.col(j);
    const Eigen::VectorXd draw = detail::mvn_from_precision(precision, rhs, rng);
    state.beta.row(j) = draw.head(d).transpose();
    state.alpha(j) = draw(d);
  }
}

/// Step (iii): per-legislator conjugate draw of x_i from the regression of
/// (ystar_ij + alpha_j) on beta_j with unit noise and a N(0, x_prior_sd^2 I)
/// prior.
template <class RNG>
void sample_ideal_points(ChainState& state, const RollCallMatrix& data, const GibbsConfig& cfg,
                         RNG& rng) {
  const int d = cfg.dims;
  Eigen::MatrixXd precision = state.beta.transpose() * state.beta;
  precision.diagonal().array() += 1.0 / (cfg.x_prior_sd * cfg.x_prior_sd);
  for (int i = 0; i < data.n; ++i) {
    const Eigen::VectorXd resp = state.ystar.row(i).transpose() + state.alpha;
    const Eigen::VectorXd rhs = state.beta.transpose() * resp;
    state.x.row(i) = detail::mvn_from_precision(precision, rhs, rng).transpose();
  }
}

/// Identification: standardize each dimension of x to mean 0, variance 1, and
/// anchor the sign so legislator 0 is non-negative in every dimension.
inline void normalize_ideal_points(Eigen::MatrixXd& x) {
  const auto n = static_cast<double>(x.rows());
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const double mean = x.col(k).mean();
    x.col(k).array() -= mean;
    const double sd = std::sqrt(x.col(k).squaredNorm() / n);
    if (sd > 0) x.col(k) /= sd;
    if (x(0, k) < 0) x.col(k) = -x.col(k);
  }
}

struct PosteriorSummary {
  std::vector<double> x_mean, x_sd;        // n * d, row-major
  std::vector<double> beta_mean, beta_sd;  // m * d, row-major
  std::vector<double> alpha_mean, alpha_sd;
  int stored = 0;
};

inline void pack(ByteWriter& w, const PosteriorSummary& s) {
  parpat::pack(w, s.x_mean);
  parpat::pack(w, s.x_sd);
  parpat::pack(w, s.beta_mean);
  parpat::pack(w, s.beta_sd);
  parpat::pack(w, s.alpha_mean);
  parpat::pack(w, s.alpha_sd);
  w.value<std::int32_t>(s.stored);
}

inline void unpack(ByteReader& r, PosteriorSummary& s) {
  parpat::unpack(r, s.x_mean);
  parpat::unpack(r, s.x_sd);
  parpat::unpack(r, s.beta_mean);
  parpat::unpack(r, s.beta_sd);
  parpat::unpack(r, s.alpha_mean);
  parpat::unpack(r, s.alpha_sd);
  s.stored = r.value<std::int32_t>();
}

namespace detail {

class RunningMoments {
 public:
  explicit RunningMoments(std::size_t n) : sum_(n, 0.0), sumsq_(n, 0.0) {}

  void add(const double* values) {
    ++count_;
    for (std::size_t i = 0; i < sum_.size(); ++i) {
      sum_[i] += values[i];
      sumsq_[i] += values[i] * values[i];
    }
  }

  std::vector<double> mean() const {
    std::vector<double> m(sum_.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = sum_[i] / static_cast<double>(count_);
    return m;
  }

  std::vector<double> sd() const {
    std::vector<double> s(sum_.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double mu = sum_[i] / static_cast<double>(count_);
      const double var = std::max(0.0, sumsq_[i] / static_cast<double>(count_) - mu * mu);
      s[i] = std::sqrt(var);
    }
    return s;
  }

  int count() const { return count_; }

 private:
  std::vector<double> sum_, sumsq_;
  int count_ = 0;
};

}  // namespace detail

/// Full Gibbs run: per iteration sample ystar, then (beta, alpha), then x,
/// then normalize x. Iterations after burn_in are stored every `thin` steps.
inline PosteriorSummary run_gibbs(const RollCallMatrix& data, const GibbsConfig& cfg) {
  data.validate();
  cfg.validate();
  const int d = cfg.dims;
  std::mt19937_64 rng(cfg.seed);

  ChainState state;
  state.x = Eigen::MatrixXd::Zero(data.n, d);
  state.beta = Eigen::MatrixXd::Zero(data.m, d);
  state.alpha = Eigen::VectorXd::Zero(data.m);
  state.ystar = Eigen::MatrixXd::Zero(data.n, data.m);
  {
    std::normal_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < data.n; ++i)
      for (int k = 0; k < d; ++k) state.x(i, k) = unit(rng);
    normalize_ideal_points(state.x);
  }

  detail::RunningMoments x_mom(state.x.size()), beta_mom(state.beta.size()),
      alpha_mom(state.alpha.size());
  // Row-major scratch copies: Eigen defaults to column-major storage.
  std::vector<double> x_row(static_cast<std::size_t>(data.n) * d),
      beta_row(static_cast<std::size_t>(data.m) * d);

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    sample_ystar(state, data, rng);
    sample_item_params(state, data, cfg, rng);
    sample_ideal_points(state, data, cfg, rng);
    normalize_ideal_points(state.x);

    if (!state.x.allFinite() || !state.beta.allFinite() || !state.alpha.allFinite() ||
        !state.ystar.allFinite())
      throw std::runtime_error("non-finite chain state at iteration " + std::to_string(iter));

    if (iter > cfg.burn_in && (iter - cfg.burn_in - 1) % cfg.thin == 0) {
      for (int i = 0; i < data.n; ++i)
        for (int k = 0; k < d; ++k) x_row[static_cast<std::size_t>(i) * d + k] = state.x(i, k);
      for (int j = 0; j < data.m; ++j)
        for (int k = 0; k < d; ++k) beta_row[static_cast<std::size_t>(j) * d + k] = state.beta(j, k);
      x_mom.add(x_row.data());
      beta_mom.add(beta_row.data());
      alpha_mom.add(state.alpha.data());
    }
  }

  PosteriorSummary out;
  out.x_mean = x_mom.mean();
  out.x_sd = x_mom.sd();
  out.beta_mean = beta_mom.mean();
  out.beta_sd = beta_mom.sd();
  out.alpha_mean = alpha_mom.mean();
  out.alpha_sd = alpha_mom.sd();
  out.stored = x_mom.count();
  return out;
}

struct SyntheticData {
  RollCallMatrix votes;
  Eigen::MatrixXd true_x;
  Eigen::MatrixXd true_beta;
  Eigen::VectorXd true_alpha;
};

/// Synthetic roll call from the generative model: x, beta ~ N(0,1),
/// alpha ~ N(0, 0.5^2), P(Yea) = Phi(beta_j . x_i - alpha_j).
inline SyntheticData generate_synthetic(int n, int m, int d, std::uint64_t seed) {
  if (n < 2 || m < 2 || d < 1) throw std::invalid_argument("generate_synthetic: bad shape");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SyntheticData data;
  data.true_x = Eigen::MatrixXd::NullaryExpr(n, d, [&] { return unit(rng); });
  data.true_beta = Eigen::MatrixXd::NullaryExpr(m, d, [&] { return unit(rng); });
  data.true_alpha = Eigen::VectorXd::NullaryExpr(m, [&] { return 0.5 * unit(rng); });

  data.votes.n = n;
  data.votes.m = m;
  data.votes.y.resize(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const double p = norm_cdf(data.true_beta.row(j).dot(data.true_x.row(i)) - data.true_alpha(j));
      data.votes.y[static_cast<std::size_t>(i) * m + j] = unif(rng) < p ? 1 : 0;
    }
  return data;
}

/// Embarrassingly parallel multi-chain run: chain k uses seed cfg.seed + k.
/// Rank 0 gets all summaries in chain order; other ranks get an empty vector.
inline std::vector<PosteriorSummary> run_multichain(const RollCallMatrix& data,
                                                    const GibbsConfig& cfg, int nchains,
                                                    Communicator& comm) {
  if (nchains < 1) throw std::invalid_argument("need at least one chain");
  std::vector<PosteriorSummary> result;
  parallel_solve_problem(
      [&] {
        std::vector<int> chains(static_cast<std::size_t>(nchains));
        for (int k = 0; k < nchains; ++k) chains[static_cast<std::size_t>(k)] = k;
        return chains;
      },
      [&](int chain) {
        GibbsConfig chain_cfg = cfg;
        chain_cfg.seed = cfg.seed + static_cast<std::uint64_t>(chain);
        return run_gibbs(data, chain_cfg);
      },
      [&](const std::vector<PosteriorSummary>& all) { result = all; }, comm);
  return result;
}

/// Spearman rank correlation, with the sign flip applied when it improves the
/// match (the model only identifies x up to sign).
inline double spearman_abs(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman: need two equal-length series");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) { return v[p] < v[q]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const auto n = static_cast<double>(a.size());
  double num = 0, da = 0, db = 0;
  const double mean = (n - 1) / 2;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - mean) * (rb[i] - mean);
    da += (ra[i] - mean) * (ra[i] - mean);
    db += (rb[i] - mean) * (rb[i] - mean);
  }
  return std::abs(num / std::sqrt(da * db));
}

/// CSV loader: first row is a header, each following row is one legislator,
/// cells in {0, 1, NA}.
inline RollCallMatrix load_roll_call_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open roll call file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty roll call file: " + path);

  RollCallMatrix data;
  int m = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    int cols = 0;
    while (std::getline(row, cell, ',')) {
      cell.erase(std::remove_if(cell.begin(), cell.end(), [](unsigned char c) { return std::isspace(c); }),
                 cell.end());
      std::int8_t v;
      if (cell == "0")
        v = 0;
      else if (cell == "1")
        v = 1;
      else if (cell == "NA" || cell.empty())
        v = kMissing;
      else
        throw std::runtime_error("bad roll call cell '" + cell + "' in " + path);
      data.y.push_back(v);
      ++cols;
    }
    if (m < 0)
      m = cols;
    else if (cols != m)
      throw std::runtime_error("ragged roll call rows in " + path);
    ++data.n;
  }
  data.m = std::max(m, 0);
  data.validate();
  return data;
}

}  // namespace parpat::idealpoint

#endif
