#pragma once

// Linear and logistic regression with plain, HC1 and one-way cluster-robust
// standard errors, plus the event-level regression tables, market-factor
// diagnostics and event-clustering regressors.

#include "bubblescope/agents.hpp"
#include "bubblescope/common.hpp"
#include "bubblescope/events.hpp"
#include "bubblescope/panel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace bubblescope::econ {

enum class SeMode { plain, hc_robust, cluster };
std::string_view to_string(SeMode m);
SeMode parse_se_mode(std::string_view s);

struct RegressionResult {
  std::string label;  // specification name, e.g. "(5)"
  std::string dependent;
  std::vector<std::string> names;  // regressors, intercept first
  std::vector<double> beta;
  std::vector<double> se;
  std::vector<double> t;
  double r2 = 0.0;  // McFadden pseudo-R2 for logit
  std::size_t n = 0;
  std::size_t clusters = 0;
  SeMode se_mode = SeMode::plain;
  bool low_power = false;  // fewer than 30 observations

  [[nodiscard]] std::optional<std::size_t> index_of(std::string_view name) const;
  [[nodiscard]] double coef(std::string_view name) const;
  [[nodiscard]] double tstat(std::string_view name) const;
};

class RankDeficientError : public Error {
 public:
  RankDeficientError(std::vector<std::string> columns, const std::string& message)
      : Error(message), columns_(std::move(columns)) {}
  [[nodiscard]] const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

// Small-sample factor applied to cluster-robust covariance:
//   G/(G-1) * (n-1)/(n-k).
// With one observation per cluster this equals the HC1 factor n/(n-k), so
// the two estimators coincide exactly.
double cluster_correction(std::size_t clusters, std::size_t n, std::size_t k);

// X must already contain the intercept column (if any). `clusters` is
// required for SeMode::cluster and must have one label per row.
RegressionResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, SeMode mode = SeMode::plain,
                     const std::vector<std::string>& clusters = {}, std::vector<std::string> names = {});

struct LogitOptions {
  int max_iter = 100;
  double tol = 1e-8;
  SeMode se_mode = SeMode::hc_robust;  // plain = inverse information
};

class SeparationError : public Error {
 public:
  using Error::Error;
};

RegressionResult logit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LogitOptions& opts = {},
                       std::vector<std::string> names = {});

// A named variable with possibly missing values, one per observation.
struct Column {
  std::string name;
  std::vector<std::optional<double>> values;
};

enum class Estimator { ols, logit };

// Regresses y on an intercept plus xs after listwise deletion of rows with
// any missing value.
RegressionResult regress(const Column& y, const std::vector<Column>& xs, SeMode mode = SeMode::plain,
                         const std::vector<std::string>& clusters = {}, Estimator estimator = Estimator::ols);

// Event-level regressors and targets.
enum class Regressor { volatility, turnover, age, acceleration, sophisticated, unique_owners, wash_trading, crash };
enum class Target { crash_dummy, ex_post_ret, turnover_post, amihud, volatility_post };

std::string_view to_string(Regressor r);
std::string_view to_string(Target t);
Column event_column(const std::vector<events::EventRow>& rows, Regressor r);
Column event_column(const std::vector<events::EventRow>& rows, Target t);

enum class ModelSpec { market_only, market_plus_agent, agent_only };
std::string_view to_string(ModelSpec s);
std::vector<Regressor> regressors_of(ModelSpec s);

RegressionResult crash_regression(const std::vector<events::EventRow>& rows, ModelSpec spec,
                                  Target target = Target::crash_dummy, SeMode mode = SeMode::plain,
                                  Estimator estimator = Estimator::ols);

// Aggregate crash predictability: each market variable alone, then jointly.
std::vector<RegressionResult> table_crash_predictability(const std::vector<events::EventRow>& rows,
                                                         SeMode mode = SeMode::plain);
// Agent-level predictability: {agent_only, market_only, market_plus_agent}
// for the crash dummy, then the same for the ex-post return.
std::vector<RegressionResult> table_agent_predictability(const std::vector<events::EventRow>& rows,
                                                         SeMode mode = SeMode::plain);
// {turnover_post, amihud, volatility_post} x {crash, unique owners, wash trading}.
std::vector<RegressionResult> liquidity_regression(const std::vector<events::EventRow>& rows,
                                                   SeMode mode = SeMode::plain);
// {ts_rank, ts_buy_rank, ts_sell_rank} x {time-varying, time-invariant}
// sophistication dummy, clustered by event.
std::vector<RegressionResult> timing_regression(const std::vector<agents::AgentEventRecord>& records);

enum class Frequency { hourly, daily, weekly };
std::string_view to_string(Frequency f);
Frequency parse_frequency(std::string_view s);

struct CollectionBeta {
  std::string collection;
  double beta = 0.0;
  double r2 = 0.0;
  std::size_t periods = 0;
};

struct MarketFactorResult {
  Frequency frequency = Frequency::daily;
  std::vector<CollectionBeta> betas;  // collections with >= 10 overlapping periods
  double mean_abs_beta = 0, median_abs_beta = 0;
  double mean_r2 = 0, median_r2 = 0;
  std::vector<double> explained;  // PCA explained-variance shares, non-increasing
  double top5_explained = 0;
  std::size_t dropped = 0;
};

MarketFactorResult market_factor_analysis(const panel::Panel& panel, Frequency frequency = Frequency::daily);

struct ClusteringFeatures {
  std::size_t prior_runup_count = 0;
  std::optional<double> prior_crash_likelihood;
};

// For each event (in input order): events of any collection with t0 in
// [t0 - 24 * horizon_days, t0) and the crash share among them.
std::vector<ClusteringFeatures> clustering_regressors(const std::vector<events::EventRow>& rows, int horizon_days);

// Joint market-variable regression augmented with the two clustering
// regressors for a given horizon.
RegressionResult clustering_regression(const std::vector<events::EventRow>& rows, int horizon_days,
                                       SeMode mode = SeMode::plain);

}  // namespace bubblescope::econ
