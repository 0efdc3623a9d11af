#include "tubal/completion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "tubal/csv.hpp"
#include "tubal/error.hpp"

namespace tubal::completion {

namespace {

void check_same(const Tensor3& a, const Tensor3& b, const char* what) {
  if (!a.same_shape(b)) raise(ErrorCode::dimension_mismatch, what);
}

Tensor3 hadamard(const Tensor3& a, const Tensor3& w) {
  Tensor3 out = a;
  out.vec().array() *= w.vec().array();
  return out;
}

double imbalance(const FactorPair& fp) {
  return frobenius_norm(tprod(ttranspose(fp.L), fp.L) - tprod(ttranspose(fp.Rt), fp.Rt));
}

}  // namespace

io::Mask make_mask(Index n1, Index n2, Index k, double p, Seed seed) {
  if (!(p > 0.0 && p <= 1.0)) raise(ErrorCode::invalid_argument, "p must lie in (0, 1]");
  if (n1 < 1 || n2 < 1 || k < 1) raise(ErrorCode::invalid_argument, "mask dimensions must be positive");
  io::Mask m;
  m.shape = {static_cast<std::uint32_t>(n1), static_cast<std::uint32_t>(n2),
             static_cast<std::uint32_t>(k)};
  m.bits.resize(static_cast<std::size_t>(n1 * n2 * k));
  Rng rng(derive_seed(seed, Stream::mask));
  for (auto& b : m.bits) b = rng.bernoulli(p) ? 1 : 0;
  return m;
}

Tensor3 mask_weights(const io::Mask& mask) {
  Tensor3 w(mask.shape.n1, mask.shape.n2, mask.shape.k);
  if (static_cast<Index>(mask.bits.size()) != w.size())
    raise(ErrorCode::dimension_mismatch, "mask payload does not match its shape");
  for (Index i = 0; i < w.size(); ++i) w.values()[i] = mask.bits[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  return w;
}

io::Mask to_mask(const Tensor3& weights) {
  io::Mask m;
  m.shape = {static_cast<std::uint32_t>(weights.n1()), static_cast<std::uint32_t>(weights.n2()),
             static_cast<std::uint32_t>(weights.k())};
  m.bits.resize(static_cast<std::size_t>(weights.size()));
  for (Index i = 0; i < weights.size(); ++i)
    m.bits[static_cast<std::size_t>(i)] = weights.values()[i] != 0.0 ? 1 : 0;
  return m;
}

MaskedObservation observe(const Tensor3& truth, const io::Mask& mask, double p,
                          const NoiseSpec& noise) {
  if (!(p > 0.0 && p <= 1.0)) raise(ErrorCode::invalid_argument, "p must lie in (0, 1]");
  MaskedObservation obs;
  obs.mask = mask_weights(mask);
  check_same(truth, obs.mask, "mask shape does not match the truth tensor");
  obs.observed = truth;
  if (noise.kind != NoiseSpec::Kind::none) obs.observed.vec() += sample_noise(noise, truth.size());
  obs.observed.vec().array() *= obs.mask.vec().array();
  obs.p = p;
  obs.seed = noise.seed;
  return obs;
}

MaskSplit carve_validation(const Tensor3& mask, double val_frac, Seed seed) {
  if (!(val_frac >= 0.0 && val_frac < 1.0))
    raise(ErrorCode::invalid_argument, "val_frac must lie in [0, 1)");
  MaskSplit s{mask, Tensor3(mask.n1(), mask.n2(), mask.k())};
  if (val_frac == 0.0) return s;
  Rng rng(derive_seed(seed, Stream::split));
  for (Index i = 0; i < mask.size(); ++i) {
    if (mask.values()[i] == 0.0) continue;
    if (rng.bernoulli(val_frac)) {
      s.train.values()[i] = 0.0;
      s.val.values()[i] = 1.0;
    }
  }
  return s;
}

FactorPair init_factors(Index n1, Index n2, Index R, Index k, double alpha, Seed seed) {
  if (!(alpha > 0.0)) raise(ErrorCode::invalid_argument, "alpha must be positive");
  if (R < 1) raise(ErrorCode::invalid_argument, "R must be positive");
  Rng rng(derive_seed(seed, Stream::init));
  const double sd = alpha / std::sqrt(static_cast<double>(R));
  FactorPair fp;
  fp.L = Tensor3::gaussian(n1, R, k, rng, sd);
  fp.Rt = Tensor3::gaussian(n2, R, k, rng, sd);
  return fp;
}

double masked_loss(const FactorPair& fp, const Tensor3& observed, const Tensor3& weights,
                   double p) {
  check_same(observed, weights, "weights do not match the observation");
  const Tensor3 e = fp.estimate();
  check_same(e, observed, "factor shapes do not match the observation");
  return 0.5 / p * ((e.vec() - observed.vec()).array() * weights.vec().array()).matrix().squaredNorm();
}

double completion_loss(const FactorPair& fp, const MaskedObservation& obs) {
  return masked_loss(fp, obs.observed, obs.mask, obs.p);
}

FactorPair completion_step(const FactorPair& fp, const Tensor3& observed, const Tensor3& weights,
                           double p, double eta) {
  check_same(observed, weights, "weights do not match the observation");
  const Tensor3 g = hadamard(fp.estimate() - observed, weights);
  const double c = eta / p;
  FactorPair next{fp.L - c * tprod(g, fp.Rt), fp.Rt - c * tprod(ttranspose(g), fp.L)};
  if (!next.L.all_finite() || !next.Rt.all_finite())
    raise(ErrorCode::divergence, "non-finite factors after a completion step");
  return next;
}

double relative_error(const Tensor3& estimate, const Tensor3& truth) {
  check_same(estimate, truth, "estimate and truth differ in shape");
  const double denom = frobenius_norm(truth);
  if (denom == 0.0) raise(ErrorCode::invalid_argument, "relative error against a zero tensor");
  return frobenius_norm(estimate - truth) / denom;
}

double psnr(const Tensor3& estimate, const Tensor3& truth) {
  check_same(estimate, truth, "estimate and truth differ in shape");
  const double peak = truth.vec().cwiseAbs().maxCoeff();
  if (peak == 0.0) raise(ErrorCode::invalid_argument, "psnr against a zero tensor");
  const double mse = (estimate.vec() - truth.vec()).squaredNorm() / static_cast<double>(truth.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

Tensor3 make_low_rank(Index n1, Index n2, Index r, Index k, Seed seed) {
  if (r < 1 || r > std::min(n1, n2)) raise(ErrorCode::invalid_argument, "rank must lie in [1, min(n1, n2)]");
  Rng rng(derive_seed(seed, Stream::truth));
  const Tensor3 l = Tensor3::gaussian(n1, r, k, rng);
  const Tensor3 rt = Tensor3::gaussian(n2, r, k, rng);
  Tensor3 x = tprod(l, ttranspose(rt));
  x *= 1.0 / x.vec().cwiseAbs().maxCoeff();
  return x;
}

void CompletionConfig::validate(Index n1, Index n2) const {
  if (R < 1 || R > std::min(n1, n2)) raise(ErrorCode::config, "R must lie in [1, min(n1, n2)]");
  if (!(eta >= 0.0) || !std::isfinite(eta)) raise(ErrorCode::config, "eta must be nonnegative");
  if (T < 0) raise(ErrorCode::config, "T must be nonnegative");
  if (!(alpha > 0.0)) raise(ErrorCode::config, "alpha must be positive");
  if (!(val_frac >= 0.0 && val_frac < 1.0)) raise(ErrorCode::config, "val_frac must lie in [0, 1)");
  if (!(divergence_guard > 1.0)) raise(ErrorCode::config, "divergence_guard must exceed 1");
}

CompletionResult complete(const MaskedObservation& obs, const MaskSplit& split,
                          const CompletionConfig& config, const Tensor3* truth) {
  const Tensor3& y = obs.observed;
  config.validate(y.n1(), y.n2());
  check_same(y, split.train, "train weights do not match the observation");
  check_same(y, split.val, "validation weights do not match the observation");
  if (truth) check_same(y, *truth, "truth does not match the observation");
  for (Index i = 0; i < y.size(); ++i)
    if (split.train.values()[i] != 0.0 && split.val.values()[i] != 0.0)
      raise(ErrorCode::invalid_argument, "train and validation masks overlap");

  FactorPair fp = init_factors(y.n1(), y.n2(), config.R, y.k(), config.alpha, config.seed);
  CompletionResult out;
  out.rows.reserve(static_cast<std::size_t>(config.T + 1));
  const double inv2p = 0.5 / obs.p;
  const double c = config.eta / obs.p;
  const auto train_w = split.train.vec().array();
  const auto val_w = split.val.vec().array();
  double initial_loss = 0.0;
  double best_val = 0.0;
  Index best_t = -1;
  double best_re_val = std::numeric_limits<double>::infinity();

  for (Index t = 0; t <= config.T; ++t) {
    const Tensor3 e = fp.estimate();
    const Eigen::ArrayXd r = (e.vec() - y.vec()).array();
    CompletionRecord rec;
    rec.iter = t;
    rec.train_loss = inv2p * (r * train_w).square().sum();
    rec.val_loss = inv2p * (r * val_w).square().sum();
    rec.imbalance = imbalance(fp);
    if (truth) {
      rec.re = relative_error(e, *truth);
      rec.psnr = psnr(e, *truth);
    } else {
      rec.re = rec.psnr = std::numeric_limits<double>::quiet_NaN();
    }
    if (t == 0) initial_loss = rec.train_loss;
    if (!std::isfinite(rec.train_loss) ||
        (initial_loss > 0.0 && rec.train_loss > config.divergence_guard * initial_loss)) {
      out.diverged = true;
      out.message = "diverged at iteration " + std::to_string(t);
      break;
    }
    out.rows.push_back(rec);
    if ((t > 0 || config.T == 0) && (best_t < 0 || rec.val_loss < best_val)) {
      best_t = t;
      best_val = rec.val_loss;
      out.estimate_es = e;
    }
    if (truth && rec.re < best_re_val) best_re_val = rec.re;
    if (t == config.T) break;

    Tensor3 g(y.n1(), y.n2(), y.k());
    g.vec() = (r * train_w).matrix();
    FactorPair next{fp.L - c * tprod(g, fp.Rt), fp.Rt - c * tprod(ttranspose(g), fp.L)};
    fp = std::move(next);
  }

  out.t_check = std::max<Index>(best_t, 0);
  if (truth && !out.rows.empty()) {
    double best_psnr = -std::numeric_limits<double>::infinity();
    for (const auto& row : out.rows) best_psnr = std::max(best_psnr, row.psnr);
    out.re_best = best_re_val;
    out.psnr_best = best_psnr;
    out.re_final = out.rows.back().re;
    if (best_t >= 0) {
      out.re_es = out.rows[static_cast<std::size_t>(best_t)].re;
      out.psnr_es = out.rows[static_cast<std::size_t>(best_t)].psnr;
    }
  } else {
    out.re_best = out.re_es = out.re_final = out.psnr_best = out.psnr_es =
        std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void write_trace_csv(std::ostream& os, const CompletionResult& result) {
  os << "iter,train_loss,val_loss,re,psnr\n";
  for (const auto& r : result.rows)
    os << r.iter << ',' << csv_number(r.train_loss) << ',' << csv_number(r.val_loss) << ','
       << csv_number(r.re) << ',' << csv_number(r.psnr) << '\n';
}

void write_summary_csv(std::ostream& os, const CompletionResult& result, double p, double sigma,
                       Index R) {
  os << "method,p,sigma,R,re_best,re_es,psnr_best,psnr_es\n"
     << "fgd," << csv_number(p) << ',' << csv_number(sigma) << ',' << R << ','
     << csv_number(result.re_best) << ',' << csv_number(result.re_es) << ','
     << csv_number(result.psnr_best) << ',' << csv_number(result.psnr_es) << '\n';
}

}  // namespace tubal::completion
