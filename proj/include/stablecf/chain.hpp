#pragma once
// Storage and reporting for MCMC output: a named matrix of retained draws,
// per-parameter summary statistics, and CSV/JSON persistence.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace stablecf {

// A sequence of parameter draws.  Rows are retained draws (post burn-in,
// post thinning); columns are named parameters.
class Chain {
 public:
  Chain() = default;
  explicit Chain(std::vector<std::string> names) : names_(std::move(names)) {}

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return draws_.size(); }
  std::size_t dim() const { return names_.size(); }

  void push(const std::vector<double>& row);
  const std::vector<double>& row(std::size_t i) const { return draws_[i]; }
  std::vector<double> column(std::size_t j) const;
  std::vector<double> column(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;

  // Mean of one column.
  double mean(std::size_t j) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> draws_;
};

// Per-parameter summary: mean, standard deviation, 5% and 95% quantiles,
// numerical standard error (batch means), a convergence t-statistic
// comparing the means of the first 50% and the last 25% of the chain, and
// relative numerical efficiency (iid variance over squared NSE).
// Conventions for degenerate chains: constant draws give sd = 0, cd = 0,
// rne = 1.
struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q5 = 0.0;
  double q95 = 0.0;
  double nse = 0.0;
  double cd = 0.0;
  double rne = 1.0;
};

// Numerical standard error of the mean of `x` by nonoverlapping batch means
// (about sqrt(n) batches).  Returns sd/sqrt(n) for very short inputs.
double batch_nse(const std::vector<double>& x);

// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> x, double level);

std::vector<ParamSummary> summarize(const Chain& chain);

// draws.csv: header of parameter names, one row per retained draw.
void write_draws_csv(const Chain& chain, const std::string& path);

// summary.csv: columns name, mean, sd, q5, q95, nse, cd, rne.
void write_summary_csv(const std::vector<ParamSummary>& summary,
                       const std::string& path);

// Sidecar metadata (seed, timings, acceptance rates, ...) as a flat JSON
// object.  Numeric strings are written as numbers, everything else as text.
void write_meta_json(const std::map<std::string, std::string>& meta,
                     const std::string& path);

}  // namespace stablecf
