#include "bubblescope/econometrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

namespace bubblescope::econ {

std::string_view to_string(SeMode m) {
  switch (m) {
    case SeMode::plain: return "plain";
    case SeMode::hc_robust: return "hc_robust";
    case SeMode::cluster: return "cluster";
  }
  return "plain";
}

SeMode parse_se_mode(std::string_view s) {
  if (s == "plain") return SeMode::plain;
  if (s == "hc_robust" || s == "robust") return SeMode::hc_robust;
  if (s == "cluster") return SeMode::cluster;
  throw Error("unknown standard-error mode '" + std::string(s) + "'");
}

std::optional<std::size_t> RegressionResult::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  return std::nullopt;
}

double RegressionResult::coef(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw Error("no regressor named " + std::string(name));
  return beta[*i];
}

double RegressionResult::tstat(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw Error("no regressor named " + std::string(name));
  return t[*i];
}

double cluster_correction(std::size_t clusters, std::size_t n, std::size_t k) {
  const auto g = static_cast<double>(clusters);
  return g / (g - 1.0) * (static_cast<double>(n) - 1.0) / static_cast<double>(n - k);
}

namespace {

std::vector<std::string> default_names(std::vector<std::string> names, Eigen::Index k) {
  if (names.empty())
    for (Eigen::Index j = 0; j < k; ++j) names.push_back("x" + std::to_string(j));
  if (static_cast<Eigen::Index>(names.size()) != k) throw Error("regressor name count does not match columns");
  return names;
}

// Groups row indices by cluster label, in order of first appearance.
std::vector<std::vector<Eigen::Index>> group_rows(const std::vector<std::string>& clusters) {
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(clusters[i], groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(static_cast<Eigen::Index>(i));
  }
  return groups;
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& meat, double factor) {
  return factor * bread * meat * bread;
}

void finish(RegressionResult& r, const Eigen::VectorXd& beta, const Eigen::MatrixXd& cov) {
  const auto k = beta.size();
  r.beta.resize(static_cast<std::size_t>(k));
  r.se.resize(static_cast<std::size_t>(k));
  r.t.resize(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto u = static_cast<std::size_t>(j);
    r.beta[u] = beta(j);
    const double var = cov(j, j);
    r.se[u] = var > 0.0 ? std::sqrt(var) : 0.0;
    r.t[u] = r.se[u] > 0.0 ? r.beta[u] / r.se[u] : std::nan("");
  }
}

Eigen::MatrixXd robust_meat(const Eigen::MatrixXd& X, const Eigen::VectorXd& score_weight, SeMode mode,
                            const std::vector<std::string>& clusters, std::size_t& n_clusters) {
  const auto n = X.rows();
  const auto k = X.cols();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  if (mode == SeMode::hc_robust) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd s = X.row(i).transpose() * score_weight(i);
      meat.noalias() += s * s.transpose();
    }
    n_clusters = static_cast<std::size_t>(n);
  } else {
    if (static_cast<Eigen::Index>(clusters.size()) != n) throw Error("cluster labels must match observation count");
    const auto groups = group_rows(clusters);
    if (groups.size() < 2) throw Error("cluster-robust errors need at least two clusters");
    for (const auto& g : groups) {
      Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
      for (auto i : g) s.noalias() += X.row(i).transpose() * score_weight(i);
      meat.noalias() += s * s.transpose();
    }
    n_clusters = groups.size();
  }
  return meat;
}

}  // namespace

RegressionResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, SeMode mode,
                     const std::vector<std::string>& clusters, std::vector<std::string> names) {
  const auto n = X.rows();
  const auto k = X.cols();
  if (y.size() != n) throw Error("design and response sizes differ");
  RegressionResult r;
  r.names = default_names(std::move(names), k);
  if (n <= k) throw Error("ols needs more observations than regressors");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    std::vector<std::string> bad;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < k; ++j) bad.push_back(r.names[static_cast<std::size_t>(perm(j))]);
    std::string msg = "design matrix is rank deficient; collinear columns:";
    for (const auto& b : bad) msg += " " + b;
    throw RankDeficientError(std::move(bad), msg);
  }
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * beta;

  // (X'X)^-1 = P R^-1 R^-T P'
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd inner = Rinv * Rinv.transpose();
  const auto& P = qr.colsPermutation();
  const Eigen::MatrixXd bread = P * inner * P.transpose();

  const double rss = resid.squaredNorm();
  const double ybar = y.mean();
  const double tss = (y.array() - ybar).square().sum();
  // A dependent variable constant up to rounding has nothing to explain.
  r.r2 = tss > 1e-20 * y.squaredNorm() ? 1.0 - rss / tss : 0.0;
  r.n = static_cast<std::size_t>(n);
  r.se_mode = mode;
  r.low_power = n < 30;

  Eigen::MatrixXd cov;
  const auto nk = static_cast<double>(n - k);
  if (mode == SeMode::plain) {
    cov = rss / nk * bread;
    r.clusters = 0;
  } else {
    const Eigen::MatrixXd meat = robust_meat(X, resid, mode, clusters, r.clusters);
    const double factor = mode == SeMode::hc_robust
                              ? static_cast<double>(n) / nk
                              : cluster_correction(r.clusters, static_cast<std::size_t>(n), static_cast<std::size_t>(k));
    cov = sandwich(bread, meat, factor);
  }
  finish(r, beta, cov);
  return r;
}

RegressionResult logit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LogitOptions& opts,
                       std::vector<std::string> names) {
  const auto n = X.rows();
  const auto k = X.cols();
  if (y.size() != n) throw Error("design and response sizes differ");
  for (Eigen::Index i = 0; i < n; ++i)
    if (y(i) != 0.0 && y(i) != 1.0) throw Error("logit response must be 0/1");
  RegressionResult r;
  r.names = default_names(std::move(names), k);
  if (n <= k) throw Error("logit needs more observations than regressors");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd p(n);
  Eigen::MatrixXd H(k, k);
  bool converged = false;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Eigen::VectorXd eta = X * beta;
    if (eta.cwiseAbs().maxCoeff() > 35.0)
      throw SeparationError("logit fitted probabilities reach 0 or 1; the outcome is (quasi-)separated");
    p = (1.0 + (-eta.array()).exp()).inverse().matrix();
    const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
    const Eigen::VectorXd grad = X.transpose() * (y - p);
    H = X.transpose() * w.asDiagonal() * X;
    if (grad.norm() < opts.tol) {
      converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw RankDeficientError({}, "logit information matrix is singular");
    beta += ldlt.solve(grad);
  }
  if (!converged) throw SeparationError("logit did not converge; coefficients diverge (separation?)");

  const Eigen::MatrixXd bread = H.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd cov;
  r.se_mode = opts.se_mode;
  if (opts.se_mode == SeMode::plain) {
    cov = bread;
  } else {
    const Eigen::VectorXd resid = y - p;
    const Eigen::MatrixXd meat = robust_meat(X, resid, SeMode::hc_robust, {}, r.clusters);
    cov = sandwich(bread, meat, static_cast<double>(n) / static_cast<double>(n - k));
  }
  finish(r, beta, cov);

  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) ll += y(i) > 0.5 ? std::log(p(i)) : std::log1p(-p(i));
  const double ybar = y.mean();
  const double ll0 = ybar > 0.0 && ybar < 1.0
                         ? static_cast<double>(n) * (ybar * std::log(ybar) + (1.0 - ybar) * std::log1p(-ybar))
                         : 0.0;
  r.r2 = ll0 < 0.0 ? 1.0 - ll / ll0 : 0.0;
  r.n = static_cast<std::size_t>(n);
  r.low_power = n < 30;
  return r;
}

RegressionResult regress(const Column& y, const std::vector<Column>& xs, SeMode mode,
                         const std::vector<std::string>& clusters, Estimator estimator) {
  const std::size_t n_all = y.values.size();
  for (const auto& x : xs)
    if (x.values.size() != n_all) throw Error("column " + x.name + " has the wrong length");
  if (mode == SeMode::cluster && clusters.size() != n_all) throw Error("cluster labels must match observation count");

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n_all; ++i) {
    bool ok = y.values[i].has_value() && std::isfinite(*y.values[i]);
    for (const auto& x : xs) ok = ok && x.values[i].has_value() && std::isfinite(*x.values[i]);
    if (ok) keep.push_back(i);
  }
  const auto n = static_cast<Eigen::Index>(keep.size());
  const auto k = static_cast<Eigen::Index>(xs.size() + 1);
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd Y(n);
  std::vector<std::string> kept_clusters;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = keep[static_cast<std::size_t>(r)];
    X(r, 0) = 1.0;
    for (std::size_t j = 0; j < xs.size(); ++j) X(r, static_cast<Eigen::Index>(j + 1)) = *xs[j].values[i];
    Y(r) = *y.values[i];
    if (mode == SeMode::cluster) kept_clusters.push_back(clusters[i]);
  }
  std::vector<std::string> names{"const"};
  for (const auto& x : xs) names.push_back(x.name);
  RegressionResult res = estimator == Estimator::ols
                             ? ols(X, Y, mode, kept_clusters, names)
                             : logit(X, Y, LogitOptions{.se_mode = mode == SeMode::plain ? SeMode::plain : SeMode::hc_robust},
                                     names);
  res.dependent = y.name;
  return res;
}

std::string_view to_string(Regressor r) {
  switch (r) {
    case Regressor::volatility: return "volatility";
    case Regressor::turnover: return "turnover";
    case Regressor::age: return "age";
    case Regressor::acceleration: return "acceleration";
    case Regressor::sophisticated: return "sophisticated";
    case Regressor::unique_owners: return "unique_owners";
    case Regressor::wash_trading: return "wash_trading";
    case Regressor::crash: return "crash";
  }
  return "?";
}

std::string_view to_string(Target t) {
  switch (t) {
    case Target::crash_dummy: return "crash";
    case Target::ex_post_ret: return "ex_post_ret";
    case Target::turnover_post: return "turnover_post";
    case Target::amihud: return "amihud";
    case Target::volatility_post: return "volatility_post";
  }
  return "?";
}

Column event_column(const std::vector<events::EventRow>& rows, Regressor r) {
  Column c{std::string(to_string(r)), {}};
  c.values.reserve(rows.size());
  for (const auto& e : rows) {
    const auto& p = e.predictors;
    switch (r) {
      case Regressor::volatility: c.values.push_back(p.volatility); break;
      case Regressor::turnover: c.values.push_back(p.turnover); break;
      case Regressor::age: c.values.push_back(p.age_hours); break;
      case Regressor::acceleration: c.values.push_back(p.acceleration); break;
      case Regressor::sophisticated: c.values.push_back(p.sophisticated_frac); break;
      case Regressor::unique_owners: c.values.push_back(p.unique_owner_change); break;
      case Regressor::wash_trading: c.values.push_back(p.wash_log_volume); break;
      case Regressor::crash: c.values.push_back(e.crash ? 1.0 : 0.0); break;
    }
  }
  return c;
}

Column event_column(const std::vector<events::EventRow>& rows, Target t) {
  Column c{std::string(to_string(t)), {}};
  c.values.reserve(rows.size());
  for (const auto& e : rows) {
    switch (t) {
      case Target::crash_dummy: c.values.push_back(e.crash ? 1.0 : 0.0); break;
      case Target::ex_post_ret: c.values.push_back(e.ex_post_ret); break;
      case Target::turnover_post: c.values.push_back(e.liquidity.turnover_post); break;
      case Target::amihud: c.values.push_back(e.liquidity.amihud); break;
      case Target::volatility_post: c.values.push_back(e.liquidity.volatility_post); break;
    }
  }
  return c;
}

std::string_view to_string(ModelSpec s) {
  switch (s) {
    case ModelSpec::market_only: return "market_only";
    case ModelSpec::market_plus_agent: return "market_plus_agent";
    case ModelSpec::agent_only: return "agent_only";
  }
  return "?";
}

std::vector<Regressor> regressors_of(ModelSpec s) {
  const std::vector<Regressor> market{Regressor::volatility, Regressor::turnover, Regressor::age,
                                      Regressor::acceleration};
  const std::vector<Regressor> agent{Regressor::sophisticated, Regressor::unique_owners, Regressor::wash_trading};
  switch (s) {
    case ModelSpec::market_only: return market;
    case ModelSpec::agent_only: return agent;
    case ModelSpec::market_plus_agent: {
      auto all = market;
      all.insert(all.end(), agent.begin(), agent.end());
      return all;
    }
  }
  return market;
}

namespace {

RegressionResult fit_events(const std::vector<events::EventRow>& rows, const std::vector<Regressor>& regs,
                            Target target, SeMode mode, Estimator estimator, std::string label) {
  std::vector<Column> xs;
  for (auto r : regs) xs.push_back(event_column(rows, r));
  auto res = regress(event_column(rows, target), xs, mode, {}, estimator);
  res.label = std::move(label);
  return res;
}

}  // namespace

RegressionResult crash_regression(const std::vector<events::EventRow>& rows, ModelSpec spec, Target target,
                                  SeMode mode, Estimator estimator) {
  if (mode == SeMode::cluster) throw Error("event-level regressions support plain or hc_robust errors");
  return fit_events(rows, regressors_of(spec), target, mode, estimator, std::string(to_string(spec)));
}

std::vector<RegressionResult> table_crash_predictability(const std::vector<events::EventRow>& rows, SeMode mode) {
  const auto market = regressors_of(ModelSpec::market_only);
  std::vector<RegressionResult> out;
  int col = 1;
  for (auto r : market) out.push_back(fit_events(rows, {r}, Target::crash_dummy, mode, Estimator::ols, "(" + std::to_string(col++) + ")"));
  out.push_back(fit_events(rows, market, Target::crash_dummy, mode, Estimator::ols, "(" + std::to_string(col) + ")"));
  return out;
}

std::vector<RegressionResult> table_agent_predictability(const std::vector<events::EventRow>& rows, SeMode mode) {
  std::vector<RegressionResult> out;
  int col = 1;
  for (auto target : {Target::crash_dummy, Target::ex_post_ret})
    for (auto spec : {ModelSpec::agent_only, ModelSpec::market_only, ModelSpec::market_plus_agent})
      out.push_back(fit_events(rows, regressors_of(spec), target, mode, Estimator::ols, "(" + std::to_string(col++) + ")"));
  return out;
}

std::vector<RegressionResult> liquidity_regression(const std::vector<events::EventRow>& rows, SeMode mode) {
  std::vector<RegressionResult> out;
  int col = 1;
  for (auto x : {Regressor::crash, Regressor::unique_owners, Regressor::wash_trading})
    for (auto target : {Target::turnover_post, Target::amihud, Target::volatility_post})
      out.push_back(fit_events(rows, {x}, target, mode, Estimator::ols, "(" + std::to_string(col++) + ")"));
  return out;
}

std::vector<RegressionResult> timing_regression(const std::vector<agents::AgentEventRecord>& records) {
  std::vector<std::string> clusters;
  clusters.reserve(records.size());
  for (const auto& r : records) clusters.push_back(r.event_id);

  auto col = [&](std::string name, auto get) {
    Column c{std::move(name), {}};
    c.values.reserve(records.size());
    for (const auto& r : records) c.values.push_back(get(r));
    return c;
  };
  const Column tv = col("sophisticated", [](const auto& r) { return r.sophisticated ? 1.0 : 0.0; });
  const Column ti = col("sophisticated_ever", [](const auto& r) { return r.sophisticated_ever ? 1.0 : 0.0; });
  const std::vector<Column> ys{col("ts_rank", [](const auto& r) { return r.ts_rank; }),
                               col("ts_buy_rank", [](const auto& r) { return r.ts_buy_rank; }),
                               col("ts_sell_rank", [](const auto& r) { return r.ts_sell_rank; })};
  std::vector<RegressionResult> out;
  int n = 1;
  for (const auto* x : {&tv, &ti})
    for (const auto& y : ys) {
      auto res = regress(y, {*x}, SeMode::cluster, clusters);
      res.label = "(" + std::to_string(n++) + ")";
      out.push_back(std::move(res));
    }
  return out;
}

std::string_view to_string(Frequency f) {
  switch (f) {
    case Frequency::hourly: return "hourly";
    case Frequency::daily: return "daily";
    case Frequency::weekly: return "weekly";
  }
  return "daily";
}

Frequency parse_frequency(std::string_view s) {
  if (s == "hourly") return Frequency::hourly;
  if (s == "daily") return Frequency::daily;
  if (s == "weekly") return Frequency::weekly;
  throw Error("unknown frequency '" + std::string(s) + "'");
}

namespace {

HourIndex period_length(Frequency f) {
  switch (f) {
    case Frequency::hourly: return 1;
    case Frequency::daily: return 24;
    case Frequency::weekly: return 168;
  }
  return 24;
}

HourIndex period_of(HourIndex h, HourIndex len) { return h >= 0 ? h / len : (h - len + 1) / len; }

// Period -> average traded price, carried through periods without trades.
std::map<HourIndex, double> period_prices(std::span<const panel::PanelRow> series, HourIndex len) {
  std::map<HourIndex, double> out;
  std::size_t i = 0;
  while (i < series.size()) {
    const HourIndex p = period_of(series[i].hour, len);
    double vol = 0.0, sales = 0.0;
    std::optional<double> last;
    for (; i < series.size() && period_of(series[i].hour, len) == p; ++i) {
      vol += series[i].volume;
      sales += series[i].sales;
      if (series[i].price) last = series[i].price;
    }
    if (sales > 0.0)
      out[p] = vol / sales;
    else if (last)
      out[p] = *last;
  }
  return out;
}

double median_of(std::vector<double> xs) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, 0.5);
}

}  // namespace

MarketFactorResult market_factor_analysis(const panel::Panel& panel, Frequency frequency) {
  const auto collections = panel.collections();
  if (collections.size() < 2) throw Error("market factor analysis needs at least two collections");
  const HourIndex len = period_length(frequency);

  std::vector<std::map<HourIndex, double>> prices;
  for (const auto& c : collections) prices.push_back(period_prices(panel.series(c), len));

  // Collection returns between consecutive periods.
  std::vector<std::map<HourIndex, double>> rets(collections.size());
  std::map<HourIndex, std::pair<double, double>> matched;  // period -> (sum P_p, sum P_{p-1})
  for (std::size_t c = 0; c < collections.size(); ++c) {
    for (const auto& [p, price] : prices[c]) {
      auto prev = prices[c].find(p - 1);
      if (prev == prices[c].end() || prev->second <= 0.0) continue;
      rets[c][p] = price / prev->second - 1.0;
      auto& m = matched[p];
      m.first += price;
      m.second += prev->second;
    }
  }
  std::map<HourIndex, double> factor;
  for (const auto& [p, m] : matched) factor[p] = m.first / m.second - 1.0;

  MarketFactorResult out;
  out.frequency = frequency;
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < collections.size(); ++c) {
    std::vector<double> xs, ys;
    for (const auto& [p, r] : rets[c]) {
      xs.push_back(factor.at(p));
      ys.push_back(r);
    }
    if (xs.size() < 10) {
      ++out.dropped;
      continue;
    }
    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = xs[static_cast<std::size_t>(i)];
      Y(i) = ys[static_cast<std::size_t>(i)];
    }
    try {
      const auto res = ols(X, Y, SeMode::plain, {}, {"const", "market"});
      out.betas.push_back({collections[c], res.beta[1], res.r2, xs.size()});
      kept.push_back(c);
    } catch (const RankDeficientError&) {
      ++out.dropped;  // market factor constant over this collection's periods
    }
  }
  if (!out.betas.empty()) {
    std::vector<double> abs_b, r2s;
    for (const auto& b : out.betas) {
      abs_b.push_back(std::abs(b.beta));
      r2s.push_back(b.r2);
    }
    out.mean_abs_beta = mean(abs_b);
    out.median_abs_beta = median_of(abs_b);
    out.mean_r2 = mean(r2s);
    out.median_r2 = median_of(r2s);
  }

  // Pairwise-complete covariance of returns across the kept collections.
  const auto m = static_cast<Eigen::Index>(kept.size());
  if (m >= 2) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = a; b < m; ++b) {
        const auto& ra = rets[kept[static_cast<std::size_t>(a)]];
        const auto& rb = rets[kept[static_cast<std::size_t>(b)]];
        std::vector<double> xa, xb;
        for (const auto& [p, r] : ra)
          if (auto it = rb.find(p); it != rb.end()) {
            xa.push_back(r);
            xb.push_back(it->second);
          }
        if (xa.size() < 2) continue;
        const double ma = mean(xa), mb = mean(xb);
        double s = 0.0;
        for (std::size_t i = 0; i < xa.size(); ++i) s += (xa[i] - ma) * (xb[i] - mb);
        cov(a, b) = cov(b, a) = s / static_cast<double>(xa.size() - 1);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    std::vector<double> lambda(eig.eigenvalues().data(), eig.eigenvalues().data() + m);
    std::sort(lambda.begin(), lambda.end(), std::greater<>());
    double total = 0.0;
    for (auto& l : lambda) {
      l = std::max(l, 0.0);
      total += l;
    }
    if (total > 0.0) {
      for (double l : lambda) out.explained.push_back(l / total);
      for (std::size_t i = 0; i < std::min<std::size_t>(5, out.explained.size()); ++i)
        out.top5_explained += out.explained[i];
    }
  }
  return out;
}

std::vector<ClusteringFeatures> clustering_regressors(const std::vector<events::EventRow>& rows, int horizon_days) {
  if (horizon_days < 1 || horizon_days > 10) throw Error("clustering horizon must be between 1 and 10 days");
  const auto order = events::chronological_order(rows);
  const HourIndex span = 24 * static_cast<HourIndex>(horizon_days);
  std::vector<ClusteringFeatures> out(rows.size());
  std::size_t lo = 0;   // first event with t0 >= current t0 - span
  std::size_t hi = 0;   // first event with t0 >= current t0
  std::size_t crashes_in = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const HourIndex t0 = rows[order[pos]].t0;
    while (hi < order.size() && rows[order[hi]].t0 < t0) {
      if (rows[order[hi]].crash) ++crashes_in;
      ++hi;
    }
    while (lo < hi && rows[order[lo]].t0 < t0 - span) {
      if (rows[order[lo]].crash) --crashes_in;
      ++lo;
    }
    auto& f = out[order[pos]];
    f.prior_runup_count = hi - lo;
    if (f.prior_runup_count > 0)
      f.prior_crash_likelihood = static_cast<double>(crashes_in) / static_cast<double>(f.prior_runup_count);
  }
  return out;
}

RegressionResult clustering_regression(const std::vector<events::EventRow>& rows, int horizon_days, SeMode mode) {
  const auto feats = clustering_regressors(rows, horizon_days);
  std::vector<Column> xs;
  for (auto r : regressors_of(ModelSpec::market_only)) xs.push_back(event_column(rows, r));
  Column count{"prior_runup_count", {}}, likelihood{"prior_crash_likelihood", {}};
  for (const auto& f : feats) {
    count.values.push_back(static_cast<double>(f.prior_runup_count));
    likelihood.values.push_back(f.prior_crash_likelihood);
  }
  xs.push_back(std::move(count));
  xs.push_back(std::move(likelihood));
  auto res = regress(event_column(rows, Target::crash_dummy), xs, mode);
  res.label = std::to_string(horizon_days) + "d";
  return res;
}

}  // namespace bubblescope::econ
