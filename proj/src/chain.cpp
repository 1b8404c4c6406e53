#include "stablecf/chain.hpp"

#include "stablecf/csv.hpp"
#include "stablecf/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace stablecf {

void Chain::push(const std::vector<double>& row) {
  if (row.size() != names_.size())
    throw DataError("chain row width does not match parameter names");
  draws_.push_back(row);
}

std::vector<double> Chain::column(std::size_t j) const {
  std::vector<double> out(draws_.size());
  for (std::size_t i = 0; i < draws_.size(); ++i) out[i] = draws_[i][j];
  return out;
}

std::size_t Chain::index_of(const std::string& name) const {
  for (std::size_t j = 0; j < names_.size(); ++j)
    if (names_[j] == name) return j;
  throw DataError("no chain column named " + name);
}

std::vector<double> Chain::column(const std::string& name) const {
  return column(index_of(name));
}

double Chain::mean(std::size_t j) const {
  double s = 0.0;
  for (const auto& r : draws_) s += r[j];
  return draws_.empty() ? 0.0 : s / static_cast<double>(draws_.size());
}

namespace {

double vector_mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) /
         static_cast<double>(x.size());
}

double vector_sd(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = vector_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

}  // namespace

double batch_nse(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 4) return vector_sd(x) / std::sqrt(std::max<std::size_t>(n, 1));
  const std::size_t nb =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::sqrt(n)));
  const std::size_t len = n / nb;
  std::vector<double> means(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += x[i];
    means[b] = s / static_cast<double>(len);
  }
  return vector_sd(means) / std::sqrt(static_cast<double>(nb));
}

double empirical_quantile(std::vector<double> x, double level) {
  if (x.empty()) throw DataError("quantile of empty sample");
  std::sort(x.begin(), x.end());
  if (level <= 0.0) return x.front();
  if (level >= 1.0) return x.back();
  const double pos = level * static_cast<double>(x.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] * (1.0 - frac) + x[lo + 1] * frac;
}

std::vector<ParamSummary> summarize(const Chain& chain) {
  std::vector<ParamSummary> out;
  const std::size_t m = chain.size();
  for (std::size_t j = 0; j < chain.dim(); ++j) {
    ParamSummary s;
    s.name = chain.names()[j];
    auto x = chain.column(j);
    s.mean = vector_mean(x);
    s.sd = vector_sd(x);
    s.q5 = empirical_quantile(x, 0.05);
    s.q95 = empirical_quantile(x, 0.95);
    s.nse = batch_nse(x);
    // Convergence t-statistic: means of the first 50% vs the last 25%.
    const std::size_t n_a = m / 2;
    const std::size_t n_b = m / 4;
    if (n_a >= 2 && n_b >= 2) {
      std::vector<double> xa(x.begin(), x.begin() + n_a);
      std::vector<double> xb(x.end() - n_b, x.end());
      const double se =
          std::sqrt(batch_nse(xa) * batch_nse(xa) + batch_nse(xb) * batch_nse(xb));
      s.cd = se > 0.0 ? (vector_mean(xa) - vector_mean(xb)) / se : 0.0;
    }
    // Relative numerical efficiency: iid variance of the mean over NSE^2.
    const double iid_var = m > 0 ? s.sd * s.sd / static_cast<double>(m) : 0.0;
    s.rne = s.nse > 0.0 ? iid_var / (s.nse * s.nse) : 1.0;
    out.push_back(s);
  }
  return out;
}

void write_draws_csv(const Chain& chain, const std::string& path) {
  std::vector<std::vector<double>> rows;
  rows.reserve(chain.size());
  for (std::size_t i = 0; i < chain.size(); ++i) rows.push_back(chain.row(i));
  csv::write(path, chain.names(), rows);
}

void write_summary_csv(const std::vector<ParamSummary>& summary,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "name,mean,sd,q5,q95,nse,cd,rne\n";
  for (const auto& s : summary) {
    out << s.name << ',' << csv::format_double(s.mean) << ','
        << csv::format_double(s.sd) << ',' << csv::format_double(s.q5) << ','
        << csv::format_double(s.q95) << ',' << csv::format_double(s.nse) << ','
        << csv::format_double(s.cd) << ',' << csv::format_double(s.rne)
        << '\n';
  }
}

void write_meta_json(const std::map<std::string, std::string>& meta,
                     const std::string& path) {
  nlohmann::json j;
  for (const auto& [key, value] : meta) {
    // Store values that parse fully as numbers numerically.
    char* end = nullptr;
    const double num = std::strtod(value.c_str(), &end);
    if (!value.empty() && end == value.c_str() + value.size() &&
        std::isfinite(num)) {
      j[key] = num;
    } else {
      j[key] = value;
    }
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace stablecf
