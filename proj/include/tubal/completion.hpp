#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tubal/io.hpp"
#include "tubal/sensing.hpp"
#include "tubal/talg.hpp"

namespace tubal::completion {

/// I.i.d. Bernoulli(p) mask, p in (0, 1].
io::Mask make_mask(Index n1, Index n2, Index k, double p, Seed seed);

/// 0/1 weights with the mask's shape, and back.
Tensor3 mask_weights(const io::Mask& mask);
io::Mask to_mask(const Tensor3& weights);

struct MaskedObservation {
  Tensor3 observed;  ///< truth + noise on the mask, exactly 0 elsewhere
  Tensor3 mask;      ///< 0/1 weights
  double p = 1.0;
  Seed seed = 0;
};

/// observed = mask * (truth + noise), the noise drawn for every entry in
/// storage order so the draw does not depend on the mask.
MaskedObservation observe(const Tensor3& truth, const io::Mask& mask, double p,
                          const NoiseSpec& noise);

struct MaskSplit {
  Tensor3 train;  ///< 0/1 weights
  Tensor3 val;
};

/// Each observed entry moves to the validation side independently with
/// probability val_frac; val_frac = 0 leaves it empty.
MaskSplit carve_validation(const Tensor3& mask, double val_frac, Seed seed);

struct FactorPair {
  Tensor3 L;   ///< n1 x R x k
  Tensor3 Rt;  ///< n2 x R x k
  Tensor3 estimate() const { return tprod(L, ttranspose(Rt)); }
};

/// Both factors i.i.d. N(0, alpha^2 / R).
FactorPair init_factors(Index n1, Index n2, Index R, Index k, double alpha, Seed seed);

/// (1/2p) ||weights .* (L * Rt^T - observed)||_F^2.
double masked_loss(const FactorPair& fp, const Tensor3& observed, const Tensor3& weights,
                   double p);
/// masked_loss over the full observation mask.
double completion_loss(const FactorPair& fp, const MaskedObservation& obs);

/// Both factors move from the same pre-step values:
/// L - (eta/p) G * Rt and Rt - (eta/p) G^T * L, G = weights .* (L Rt^T - observed).
/// Throws ErrorCode::divergence on non-finite output.
FactorPair completion_step(const FactorPair& fp, const Tensor3& observed, const Tensor3& weights,
                           double p, double eta);

/// ||est - truth||_F / ||truth||_F.
double relative_error(const Tensor3& estimate, const Tensor3& truth);

/// Value reported when the estimate is exact.
inline constexpr double kPsnrCap = 999.0;
/// 10 log10(max|truth|^2 / mse), capped at kPsnrCap.
double psnr(const Tensor3& estimate, const Tensor3& truth);

/// Low-tubal-rank test tensor L* Rt*^T from Gaussian factors, rescaled so
/// its largest entry magnitude is 1 (the range of pixel data).
Tensor3 make_low_rank(Index n1, Index n2, Index r, Index k, Seed seed);

struct CompletionConfig {
  Index R = 1;
  double eta = 1e-3;
  Index T = 2000;
  double alpha = 1e-5;
  double val_frac = 0.05;
  double divergence_guard = 1e6;
  Seed seed = 0;

  void validate(Index n1, Index n2) const;
};

struct CompletionRecord {
  Index iter = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double re = 0.0;     ///< NaN without ground truth
  double psnr = 0.0;   ///< NaN without ground truth
  double imbalance = 0.0;  ///< ||L^T L - Rt^T Rt||_F
};

struct CompletionResult {
  std::vector<CompletionRecord> rows;
  Index t_check = 0;
  Tensor3 estimate_es;  ///< L * Rt^T at t_check
  double re_best = 0.0, re_es = 0.0, re_final = 0.0;
  double psnr_best = 0.0, psnr_es = 0.0;
  bool diverged = false;
  std::string message;
};

/// Iterates completion_step on the train weights and scores e_t on the
/// disjoint val weights, returning the argmin-e_t estimate (t in 1..T,
/// earliest on ties) and, with a truth tensor, the oracle-best values.
CompletionResult complete(const MaskedObservation& obs, const MaskSplit& split,
                          const CompletionConfig& config, const Tensor3* truth = nullptr);

/// Header iter,train_loss,val_loss,re,psnr.
void write_trace_csv(std::ostream& os, const CompletionResult& result);
/// Header method,p,sigma,R,re_best,re_es,psnr_best,psnr_es and one row.
void write_summary_csv(std::ostream& os, const CompletionResult& result, double p, double sigma,
                       Index R);

}  // namespace tubal::completion
