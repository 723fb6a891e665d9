#include "bubblescope/synth.hpp"

#include "bubblescope/washtrade.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

namespace bubblescope::synth {

std::map<std::string, double> default_effects() {
  return {{"volatility", 1.0},          {"turnover", -1.0},           {"acceleration", 1.0},
          {"sophisticated_frac", -1.0}, {"unique_owner_change", -1.0}, {"wash_volume", 1.0}};
}

double EventFeatures::get(std::size_t i) const {
  switch (i) {
    case 0: return volatility;
    case 1: return turnover;
    case 2: return acceleration;
    case 3: return sophisticated_frac;
    case 4: return unique_owner_change;
    case 5: return wash_log_volume;
    default: throw Error("feature index out of range");
  }
}

std::string_view to_string(LoopType t) {
  switch (t) {
    case LoopType::self_trade: return "self_trade";
    case LoopType::inverted_pair: return "inverted_pair";
    case LoopType::repeat_buyer: return "repeat_buyer";
    case LoopType::shared_funder: return "shared_funder";
    case LoopType::direct_funder: return "direct_funder";
  }
  return "?";
}

void validate(const SynthConfig& c) {
  auto fail = [](const std::string& m) { throw Error("invalid synth config: " + m); };
  if (c.n_collections < 1) fail("n_collections must be positive");
  if (c.horizon_hours < 200) fail("horizon_hours must be at least 200");
  if (c.n_wallets < 100 * c.n_collections) fail("n_wallets must allow at least 100 wallets per collection");
  if (c.runup_rate < 0) fail("runup_rate must be non-negative");
  if (!(c.crash_prob_base > 0.0 && c.crash_prob_base < 1.0)) fail("crash_prob_base must lie in (0, 1)");
  if (c.wash_loop_count < 0) fail("wash_loop_count must be non-negative");
  if (c.sophisticated_share < 0.0 || c.sophisticated_share > 1.0) fail("sophisticated_share must lie in [0, 1]");
  if (c.max_sophisticated_per_event < 0) fail("max_sophisticated_per_event must be non-negative");
  for (const auto& [k, v] : c.planted_effects) {
    if (std::find(kFeatureNames.begin(), kFeatureNames.end(), k) == kFeatureNames.end())
      fail("unknown planted effect '" + k + "'");
    if (!std::isfinite(v)) fail("planted effect '" + k + "' is not finite");
  }
}

namespace {

// Standardization of the realized features inside the crash logit.
constexpr std::array<double, 6> kCenter = {0.28, 1.09, 1.755, 0.022, 0.033, 2.8};
constexpr std::array<double, 6> kScale = {0.03, 0.56, 0.126, 0.03, 0.124, 1.69};

constexpr int kW = 24;
constexpr int kParticipationCap = 4;  // ordinary wallets never reach the 5-event floor
constexpr int kEventSpacing = 2 * kW + 1 + 24;
constexpr int kFirstEvent = 72;
constexpr int kCex = 6, kMixers = 3;
constexpr double kBackgroundRate = 0.25;

std::uint64_t splitmix(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string hex_id(std::size_t words, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t s = a * 0x100000001b3ULL ^ (b << 20) ^ (c * 0x9e3779b97f4a7c15ULL);
  std::string out = "0x";
  char buf[17];
  for (std::size_t i = 0; i < words; ++i) {
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(splitmix(s)));
    out += buf;
  }
  return out;
}

enum Tag : std::uint64_t { kOrdinary = 1, kSoph, kWash, kPrivate, kCexTag, kMixerTag, kDex, kTx, kOther };

std::string address(Tag tag, std::uint64_t a, std::uint64_t b = 0) {
  return hex_id(3, tag, a, b).substr(0, 42);
}

// Distribution transforms are written out so results do not depend on the
// standard library's implementation-defined distributions.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    eng_.seed(seq);
  }
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int integer(int lo, int hi) {
    return lo + static_cast<int>(std::floor(uniform() * static_cast<double>(hi - lo + 1)));
  }
  bool bernoulli(double p) { return uniform() < p; }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  int poisson(double lambda) {
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

 private:
  std::mt19937_64 eng_;
};

struct SophSlot {
  std::size_t global = 0;
  bool eligible = false;
  int buy_hour = 0;  // event time
};

struct EventPlan {
  HourIndex t0 = 0;  // local hour
  std::vector<SophSlot> soph;
};

struct CollectionPlan {
  std::vector<EventPlan> events;
  std::vector<LoopType> loops;
};

struct CollectionOutput {
  std::vector<ingest::Transfer> transfers;
  std::vector<ingest::FundingEdge> funding;
  std::vector<PlantedEvent> events;
  std::vector<PlantedWashTrade> wash;
  std::vector<std::string> sample_wallets;  // ordinary wallets given a chain history
};

std::string collection_name(int c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "collection-%03d", c);
  return buf;
}

class CollectionSim {
 public:
  CollectionSim(const SynthConfig& cfg, int index, const CollectionPlan& plan,
                const std::vector<std::string>& soph_addresses)
      : cfg_(cfg),
        index_(index),
        name_(collection_name(index)),
        plan_(plan),
        soph_addresses_(soph_addresses),
        rng_(cfg.seed, static_cast<std::uint64_t>(index) + 1),
        origin_(hour_of(cfg.start)),
        wallet_budget_(static_cast<std::size_t>(cfg.n_wallets / cfg.n_collections)) {}

  CollectionOutput run();

 private:
  enum class Kind { ordinary, soph, wash };
  struct Wallet {
    std::string addr;
    Kind kind = Kind::ordinary;
    int balance = 0;
    int participations = 0;
    int last_event = -1;
    std::vector<int> held;
  };
  struct Token {
    int owner = -1;
    std::vector<int> prev;
  };
  enum class Mode { neutral, dispersing, concentrating };

  int new_ordinary();
  int new_wash(const std::string& funder);
  int soph_wallet(std::size_t global);
  std::string private_funder();
  void fund(const std::string& wallet, const std::string& funder);
  void set_owner(int token, int wallet);
  std::string emit(HourIndex h, int from, int to, int token, double price);
  void mint(HourIndex h, int to, int token);
  bool window_eligible(int w) const;
  void touch(int w);
  int pick_seller(Mode mode);
  int pick_buyer(int seller, int token, Mode mode);
  void organic_trade(HourIndex h, double price, Mode mode);
  void background_hour(HourIndex h);
  void wash_loop(HourIndex h, LoopType type);
  void run_event(std::size_t e);
  void calm_step();
  int random_token(int wallet) { return wallets_[wallet].held[static_cast<std::size_t>(rng_.integer(0, static_cast<int>(wallets_[wallet].held.size()) - 1))]; }

  const SynthConfig& cfg_;
  int index_;
  std::string name_;
  const CollectionPlan& plan_;
  const std::vector<std::string>& soph_addresses_;
  Rng rng_;
  HourIndex origin_;
  std::size_t wallet_budget_;

  std::vector<Wallet> wallets_;
  std::size_t n_ordinary_ = 0;
  std::unordered_map<std::size_t, int> soph_local_;
  std::vector<Token> tokens_;
  std::vector<int> holders_;  // ordinary wallets with balance > 0
  std::vector<int> holder_pos_;
  std::size_t owners_ = 0;     // wallets of any kind with balance > 0
  std::size_t n_private_ = 0;
  std::size_t n_wash_ = 0;
  std::uint64_t tx_seq_ = 0;
  HourIndex ts_hour_ = -1;
  int ts_slot_ = 0;

  double base_log_ = 0.0;
  double log_p_ = 0.0;
  int cur_event_ = -1;
  double wash_flagged_volume_ = 0.0;

  CollectionOutput out_;
};

void CollectionSim::fund(const std::string& wallet, const std::string& funder) {
  out_.funding.push_back({wallet, funder, cfg_.start - 86400 * static_cast<Timestamp>(rng_.integer(30, 400))});
}

std::string CollectionSim::private_funder() { return address(kPrivate, static_cast<std::uint64_t>(index_), n_private_++); }

int CollectionSim::new_ordinary() {
  if (n_ordinary_ >= wallet_budget_)
    throw Error("synthetic market infeasible: " + name_ + " needs more than " + std::to_string(wallet_budget_) +
                " ordinary wallets (raise n_wallets)");
  Wallet w;
  w.addr = address(kOrdinary, static_cast<std::uint64_t>(index_), n_ordinary_++);
  const double u = rng_.uniform();
  if (u < 0.6)
    fund(w.addr, address(kCexTag, static_cast<std::uint64_t>(rng_.integer(0, kCex - 1))));
  else if (u < 0.7)
    fund(w.addr, address(kMixerTag, static_cast<std::uint64_t>(rng_.integer(0, kMixers - 1))));
  else
    fund(w.addr, private_funder());
  if (out_.sample_wallets.size() < 20) out_.sample_wallets.push_back(w.addr);
  wallets_.push_back(std::move(w));
  holder_pos_.push_back(-1);
  return static_cast<int>(wallets_.size()) - 1;
}

int CollectionSim::new_wash(const std::string& funder) {
  Wallet w;
  w.addr = address(kWash, static_cast<std::uint64_t>(index_), n_wash_++);
  w.kind = Kind::wash;
  fund(w.addr, funder);
  wallets_.push_back(std::move(w));
  holder_pos_.push_back(-1);
  return static_cast<int>(wallets_.size()) - 1;
}

int CollectionSim::soph_wallet(std::size_t global) {
  auto it = soph_local_.find(global);
  if (it != soph_local_.end()) return it->second;
  Wallet w;
  w.addr = soph_addresses_[global];
  w.kind = Kind::soph;
  wallets_.push_back(std::move(w));
  holder_pos_.push_back(-1);
  const int id = static_cast<int>(wallets_.size()) - 1;
  soph_local_.emplace(global, id);
  return id;
}

void CollectionSim::set_owner(int token, int wallet) {
  auto& t = tokens_[static_cast<std::size_t>(token)];
  if (t.owner >= 0) {
    auto& old = wallets_[static_cast<std::size_t>(t.owner)];
    auto pos = std::find(old.held.begin(), old.held.end(), token);
    *pos = old.held.back();
    old.held.pop_back();
    if (--old.balance == 0) {
      --owners_;
      if (old.kind == Kind::ordinary) {
        const int p = holder_pos_[static_cast<std::size_t>(t.owner)];
        holders_[static_cast<std::size_t>(p)] = holders_.back();
        holder_pos_[static_cast<std::size_t>(holders_.back())] = p;
        holders_.pop_back();
        holder_pos_[static_cast<std::size_t>(t.owner)] = -1;
      }
    }
    t.prev.push_back(t.owner);
  }
  auto& nw = wallets_[static_cast<std::size_t>(wallet)];
  if (nw.balance++ == 0) {
    ++owners_;
    if (nw.kind == Kind::ordinary) {
      holder_pos_[static_cast<std::size_t>(wallet)] = static_cast<int>(holders_.size());
      holders_.push_back(wallet);
    }
  }
  nw.held.push_back(token);
  t.owner = wallet;
}

std::string CollectionSim::emit(HourIndex h, int from, int to, int token, double price) {
  if (h != ts_hour_) {
    ts_hour_ = h;
    ts_slot_ = 0;
  }
  if (++ts_slot_ >= 360) throw Error("synthetic market infeasible: too many transfers in one hour of " + name_);
  ingest::Transfer t;
  t.tx_id = hex_id(4, kTx ^ (cfg_.seed << 8), static_cast<std::uint64_t>(index_), tx_seq_++);
  t.ts = hour_start(origin_ + h) + 10 * ts_slot_;
  t.collection = name_;
  t.token = std::to_string(token);
  t.from = from < 0 ? std::string(kZeroAddress) : wallets_[static_cast<std::size_t>(from)].addr;
  t.to = wallets_[static_cast<std::size_t>(to)].addr;
  t.price_eth = price;
  t.price_usd = std::round(price * 3500.0 * 100.0) / 100.0;
  if (from >= 0 && from == to) {
    t.from = t.to;  // self transfer keeps ownership
    tokens_[static_cast<std::size_t>(token)].prev.push_back(to);
  } else {
    set_owner(token, to);
  }
  out_.transfers.push_back(t);
  return t.tx_id;
}

void CollectionSim::mint(HourIndex h, int to, int token) { emit(h, -1, to, token, 0.0); }

bool CollectionSim::window_eligible(int w) const {
  const auto& x = wallets_[static_cast<std::size_t>(w)];
  return x.kind == Kind::ordinary && (x.last_event == cur_event_ || x.participations < kParticipationCap);
}

void CollectionSim::touch(int w) {
  auto& x = wallets_[static_cast<std::size_t>(w)];
  if (cur_event_ < 0 || x.kind != Kind::ordinary || x.last_event == cur_event_) return;
  x.last_event = cur_event_;
  ++x.participations;
}

int CollectionSim::pick_seller(Mode mode) {
  if (holders_.empty()) throw Error("synthetic market infeasible: " + name_ + " has no holders left");
  const bool in_window = cur_event_ >= 0;
  auto ok = [&](int w) { return !in_window || window_eligible(w); };
  auto preferred = [&](int w) {
    const int b = wallets_[static_cast<std::size_t>(w)].balance;
    if (mode == Mode::dispersing) return b >= 2;
    if (mode == Mode::concentrating) return b == 1;
    return true;
  };
  const int n = static_cast<int>(holders_.size());
  for (int pass = 0; pass < 2; ++pass)
    for (int tries = 0; tries < 64; ++tries) {
      const int w = holders_[static_cast<std::size_t>(rng_.integer(0, n - 1))];
      if (ok(w) && (pass == 1 || preferred(w))) return w;
    }
  for (int w : holders_)
    if (ok(w)) return w;
  throw Error("synthetic market infeasible: no eligible seller in " + name_ + " (collection too small for its events)");
}

int CollectionSim::pick_buyer(int seller, int token, Mode mode) {
  const auto& prev = tokens_[static_cast<std::size_t>(token)].prev;
  const bool in_window = cur_event_ >= 0;
  double fresh_prob = 0.3;
  if (mode == Mode::dispersing) fresh_prob = 1.0;
  if (mode == Mode::concentrating) fresh_prob = 0.0;
  if (!rng_.bernoulli(fresh_prob) && !holders_.empty()) {
    const int n = static_cast<int>(holders_.size());
    for (int tries = 0; tries < 64; ++tries) {
      const int w = holders_[static_cast<std::size_t>(rng_.integer(0, n - 1))];
      if (w == seller || (in_window && !window_eligible(w))) continue;
      if (std::find(prev.begin(), prev.end(), w) != prev.end()) continue;
      return w;
    }
  }
  return new_ordinary();
}

void CollectionSim::organic_trade(HourIndex h, double price, Mode mode) {
  const int seller = pick_seller(mode);
  const int token = random_token(seller);
  const int buyer = pick_buyer(seller, token, mode);
  touch(seller);
  touch(buyer);
  emit(h, seller, buyer, token, price);
}

void CollectionSim::calm_step() {
  const double drift = std::clamp(-0.01 * (log_p_ - base_log_), -0.004, 0.004);
  log_p_ += drift + 0.004 * rng_.normal();
}

void CollectionSim::background_hour(HourIndex h) {
  const int n = rng_.poisson(kBackgroundRate);
  for (int i = 0; i < n; ++i) organic_trade(h, std::exp(log_p_), Mode::neutral);
}

void CollectionSim::wash_loop(HourIndex h, LoopType type) {
  const double price = std::exp(log_p_);
  const int holder = pick_seller(Mode::neutral);
  const int token = random_token(holder);
  const std::string tok = std::to_string(token);
  auto flagged = [&](const std::string& tx, std::uint8_t bits) {
    out_.wash.push_back({tx, tok, name_, type, bits});
    wash_flagged_volume_ += price;
  };
  switch (type) {
    case LoopType::self_trade: {
      const int a = new_wash(private_funder());
      emit(h, holder, a, token, price);
      flagged(emit(h, a, a, token, price), wash::self_trade);
      break;
    }
    case LoopType::inverted_pair: {
      const int a = new_wash(private_funder());
      const int b = new_wash(private_funder());
      emit(h, holder, a, token, price);
      flagged(emit(h, a, b, token, price), wash::inverted_pair);
      flagged(emit(h, b, a, token, price), wash::inverted_pair);
      break;
    }
    case LoopType::repeat_buyer: {
      const int w = new_wash(private_funder());
      int x[4];
      for (int& xi : x) xi = new_wash(private_funder());
      flagged(emit(h, holder, w, token, price), wash::repeat_buyer);
      flagged(emit(h, w, x[0], token, price), wash::repeat_buyer);
      emit(h, x[0], x[1], token, price);
      flagged(emit(h, x[1], w, token, price), wash::repeat_buyer);
      flagged(emit(h, w, x[2], token, price), wash::repeat_buyer);
      emit(h, x[2], x[3], token, price);
      flagged(emit(h, x[3], w, token, price), wash::repeat_buyer);
      break;
    }
    case LoopType::shared_funder: {
      const std::string f = private_funder();
      const int a = new_wash(f);
      const int b = new_wash(f);
      emit(h, holder, a, token, price);
      flagged(emit(h, a, b, token, price), wash::common_funder);
      break;
    }
    case LoopType::direct_funder: {
      const int s = new_wash(private_funder());
      const int b = new_wash(wallets_[static_cast<std::size_t>(s)].addr);
      emit(h, holder, s, token, price);
      flagged(emit(h, s, b, token, price), wash::common_funder);
      break;
    }
  }
}

void CollectionSim::run_event(std::size_t e) {
  const auto& plan = plan_.events[e];
  const HourIndex t0 = plan.t0;
  cur_event_ = static_cast<int>(e);

  // Ex-ante path relative to P(-24).
  const double p_start = std::exp(log_p_);
  const double a1 = rng_.uniform(0.0, 0.3);
  const double g1 = rng_.uniform(1.25, 1.35);
  const double big_g = rng_.uniform(2.75, 3.05);
  const double zig = rng_.uniform(0.0, 0.25);
  const double lambda_u = rng_.uniform(0.0, 1.0);
  std::array<double, 2 * kW + 1> price{};
  auto P = [&](int t) -> double& { return price[static_cast<std::size_t>(t + kW)]; };
  for (int t = -kW; t <= 0; ++t) {
    double lg;
    if (t <= -12)
      lg = std::log1p(a1) * static_cast<double>(t + kW) / 12.0;
    else if (t <= -1)
      lg = std::log1p(a1) + (std::log(g1) - std::log1p(a1)) * static_cast<double>(t + 12) / 11.0;
    else
      lg = std::log(big_g);
    double g = std::exp(lg);
    if (t <= -3 && (t % 2 != 0)) g *= 1.0 + zig;
    P(t) = p_start * g;
  }

  int k_base = rng_.integer(1, 4);
  const int k_floor = static_cast<int>(std::ceil(12.0 / (static_cast<double>(kW + 1) * p_start)));
  k_base = std::max(k_base, k_floor);

  std::vector<int> soph_ids;
  std::vector<int> soph_tokens;
  for (const auto& s : plan.soph) soph_ids.push_back(soph_wallet(s.global));
  soph_tokens.assign(soph_ids.size(), -1);

  std::array<double, 2 * kW + 1> count{};
  std::set<int> active;
  double frac_before = 0.0, frac_after = 0.0;
  const double supply = static_cast<double>(tokens_.size());
  auto fraction = [&] { return static_cast<double>(owners_) / supply; };

  for (int t = -kW; t <= 0; ++t) {
    const HourIndex h = t0 + t;
    const double p = P(t);
    for (std::size_t s = 0; s < soph_ids.size(); ++s) {
      if (plan.soph[s].buy_hour != t) continue;
      // A token the wallet held before would form an inverted pair.
      auto held_before = [&](int tok) {
        const auto& prev = tokens_[static_cast<std::size_t>(tok)].prev;
        return std::find(prev.begin(), prev.end(), soph_ids[s]) != prev.end();
      };
      int seller = pick_seller(Mode::neutral);
      int token = random_token(seller);
      for (int tries = 0; held_before(token) && tries < 64; ++tries) {
        seller = pick_seller(Mode::neutral);
        token = random_token(seller);
      }
      if (held_before(token))
        throw Error("synthetic market infeasible: no fresh token for a sophisticated buyer in " + name_);
      touch(seller);
      emit(h, seller, soph_ids[s], token, p);
      soph_tokens[s] = token;
      active.insert(seller);
      active.insert(soph_ids[s]);
      count[static_cast<std::size_t>(t + kW)] += 1;
    }
    int k = std::max(1, k_base + (rng_.bernoulli(0.3) ? rng_.integer(-1, 1) : 0));
    for (int i = 0; i < k; ++i) {
      const Mode mode = rng_.bernoulli(lambda_u) ? Mode::dispersing : Mode::concentrating;
      organic_trade(h, p, mode);
      // Recover both sides from the ownership update.
      const int token = std::stoi(out_.transfers.back().token);
      const int buyer = tokens_[static_cast<std::size_t>(token)].owner;
      const int seller = tokens_[static_cast<std::size_t>(token)].prev.back();
      active.insert(buyer);
      active.insert(seller);
      count[static_cast<std::size_t>(t + kW)] += 1;
    }
    if (t == -kW) frac_before = fraction();
  }
  frac_after = fraction();

  PlantedEvent ev;
  ev.collection = name_;
  ev.t0 = origin_ + t0;
  std::vector<double> rets;
  for (int t = -kW + 1; t <= 0; ++t) rets.push_back(P(t) / P(t - 1) - 1.0);
  ev.features.volatility = sample_sd(rets);
  double tv = 0.0;
  for (int t = -kW; t <= 0; ++t) tv += count[static_cast<std::size_t>(t + kW)] / supply * 100.0;
  ev.features.turnover = tv / static_cast<double>(kW + 1);
  ev.features.acceleration = (P(0) / P(-kW) - 1.0) - (P(-12) / P(-kW) - 1.0);
  for (std::size_t s = 0; s < soph_ids.size(); ++s) {
    ev.sophisticated_participants.push_back(soph_addresses_[plan.soph[s].global]);
    if (plan.soph[s].eligible) ++ev.sophisticated_eligible;
  }
  ev.features.sophisticated_frac = static_cast<double>(ev.sophisticated_eligible) / static_cast<double>(active.size());
  ev.features.unique_owner_change = frac_after - frac_before;
  ev.features.wash_log_volume = std::log1p(wash_flagged_volume_);

  double z = std::log(cfg_.crash_prob_base / (1.0 - cfg_.crash_prob_base));
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i) {
    auto it = cfg_.planted_effects.find(std::string(kFeatureNames[i]));
    if (it == cfg_.planted_effects.end()) continue;
    z += it->second * (ev.features.get(i) - kCenter[i]) / kScale[i];
  }
  ev.crash_probability = 1.0 / (1.0 + std::exp(-z));
  ev.crash = rng_.bernoulli(ev.crash_probability);

  // Ex-post path relative to P(0).
  const double p0 = P(0);
  if (ev.crash) {
    const int tp = rng_.integer(1, 3);
    const double m = std::log(rng_.uniform(1.02, 1.15));
    const double end = std::log1p(rng_.uniform(-0.85, -0.45));
    for (int t = 1; t <= kW; ++t) {
      double lg = t <= tp ? m * t / tp : m + (end - m) * static_cast<double>(t - tp) / static_cast<double>(kW - tp);
      if (t > tp && t < kW) lg += 0.02 * rng_.normal();
      P(t) = p0 * std::exp(lg);
    }
  } else {
    const double b = std::log(rng_.uniform(1.02, 1.10));
    const double end = std::log1p(rng_.uniform(-0.3, 0.8));
    for (int t = 1; t <= kW; ++t) {
      double lg = b + (end - b) * static_cast<double>(t - 1) / static_cast<double>(kW - 1);
      if (t > 1 && t < kW) lg += 0.03 * rng_.normal();
      P(t) = p0 * std::exp(lg);
    }
  }
  ev.ex_post_ret = P(kW) / p0 - 1.0;
  int peak = 0;
  for (int t = 1; t <= kW; ++t)
    if (P(t) > P(peak)) peak = t;
  ev.peak_hour = peak;

  double k_post = static_cast<double>(k_base) * (ev.crash ? 0.35 : 1.0) * std::exp(-0.1 * ev.features.wash_log_volume);
  const int k_post_base = std::max(1, static_cast<int>(std::lround(k_post)));
  for (int t = 1; t <= kW; ++t) {
    const HourIndex h = t0 + t;
    const double p = P(t);
    if (t == peak)
      for (std::size_t s = 0; s < soph_ids.size(); ++s) {
        const int buyer = pick_buyer(soph_ids[s], soph_tokens[s], Mode::neutral);
        touch(buyer);
        emit(h, soph_ids[s], buyer, soph_tokens[s], p);
      }
    const int k = std::max(1, k_post_base + (rng_.bernoulli(0.3) ? rng_.integer(-1, 1) : 0));
    for (int i = 0; i < k; ++i) organic_trade(h, p, Mode::neutral);
  }
  log_p_ = std::log(P(kW));
  cur_event_ = -1;
  out_.events.push_back(std::move(ev));
}

CollectionOutput CollectionSim::run() {
  const HourIndex horizon = cfg_.horizon_hours;
  base_log_ = std::log(rng_.uniform(0.5, 3.0));
  log_p_ = base_log_;

  // Mints over the first three hours, 1-6 tokens per initial holder.
  const int supply = rng_.integer(150, 400);
  tokens_.resize(static_cast<std::size_t>(supply));
  int minted = 0;
  while (minted < supply) {
    const int w = new_ordinary();
    const int n = std::min(rng_.integer(1, 6), supply - minted);
    for (int i = 0; i < n; ++i, ++minted) mint(minted * 3 / supply, w, minted);
  }

  // Event windows and the hours available for wash loops.
  std::vector<char> in_window(static_cast<std::size_t>(horizon), 0);
  for (const auto& ev : plan_.events)
    for (HourIndex h = ev.t0 - kW; h <= ev.t0 + kW; ++h) in_window[static_cast<std::size_t>(h)] = 1;
  std::vector<HourIndex> gap_hours;
  for (HourIndex h = 3; h < horizon; ++h)
    if (!in_window[static_cast<std::size_t>(h)]) gap_hours.push_back(h);
  if (plan_.loops.size() > gap_hours.size()) throw Error("synthetic market infeasible: too many wash loops for " + name_);
  std::map<HourIndex, std::vector<LoopType>> loop_at;
  for (auto type : plan_.loops) loop_at[gap_hours[static_cast<std::size_t>(rng_.integer(0, static_cast<int>(gap_hours.size()) - 1))]].push_back(type);

  std::size_t next_event = 0;
  for (HourIndex h = 3; h < horizon; ++h) {
    calm_step();
    if (next_event < plan_.events.size() && h == plan_.events[next_event].t0 - kW) {
      run_event(next_event);
      h = plan_.events[next_event].t0 + kW;
      ++next_event;
      continue;
    }
    background_hour(h);
    if (auto it = loop_at.find(h); it != loop_at.end())
      for (auto type : it->second) wash_loop(h, type);
    if (h == horizon - 1 && (out_.transfers.empty() || hour_of(out_.transfers.back().ts) != origin_ + h))
      organic_trade(h, std::exp(log_p_), Mode::neutral);
  }
  return std::move(out_);
}

// Cross-collection schedule: event hours, sophisticated participation with
// its eligibility, and wash-loop allocation.
struct MarketPlan {
  std::vector<CollectionPlan> collections;
  std::vector<std::string> soph_addresses;
};

MarketPlan plan_market(const SynthConfig& cfg) {
  Rng rng(cfg.seed, 0);
  const int n_coll = cfg.n_collections;
  MarketPlan plan;
  plan.collections.resize(static_cast<std::size_t>(n_coll));

  const auto total = static_cast<long>(std::lround(cfg.runup_rate * n_coll * cfg.horizon_hours / 1000.0));
  std::vector<int> counts(static_cast<std::size_t>(n_coll), static_cast<int>(total / n_coll));
  std::vector<int> order(static_cast<std::size_t>(n_coll));
  std::iota(order.begin(), order.end(), 0);
  for (int i = n_coll - 1; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.integer(0, i))]);
  for (long i = 0; i < total % n_coll; ++i) ++counts[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];

  const long last = cfg.horizon_hours - kW - 3;
  for (int c = 0; c < n_coll; ++c) {
    const int n = counts[static_cast<std::size_t>(c)];
    if (n == 0) continue;
    const long slack = last - kFirstEvent - static_cast<long>(n - 1) * kEventSpacing;
    if (slack < 0)
      throw Error("synthetic market infeasible: " + std::to_string(n) + " run-ups do not fit in " +
                  std::to_string(cfg.horizon_hours) + " hours");
    std::vector<long> pos;
    for (int i = 0; i < n; ++i) pos.push_back(rng.integer(0, static_cast<int>(slack)));
    std::sort(pos.begin(), pos.end());
    for (int i = 0; i < n; ++i)
      plan.collections[static_cast<std::size_t>(c)].events.push_back({kFirstEvent + pos[static_cast<std::size_t>(i)] + static_cast<long>(i) * kEventSpacing, {}});
  }

  const auto n_soph = static_cast<std::size_t>(std::lround(cfg.sophisticated_share * cfg.n_wallets));
  for (std::size_t i = 0; i < n_soph; ++i) plan.soph_addresses.push_back(address(kSoph, i));

  // Chronological pass: a wallet is eligible at an event once it has five
  // participations at strictly earlier event hours. Planted profits always
  // exceed the 25% bar, so participation count is the only condition.
  std::vector<std::pair<HourIndex, int>> chrono;
  for (int c = 0; c < n_coll; ++c)
    for (std::size_t e = 0; e < plan.collections[static_cast<std::size_t>(c)].events.size(); ++e)
      chrono.emplace_back(plan.collections[static_cast<std::size_t>(c)].events[e].t0, c);
  std::sort(chrono.begin(), chrono.end());
  std::vector<std::size_t> next_idx(static_cast<std::size_t>(n_coll), 0);
  std::vector<int> done(n_soph, 0);
  std::size_t g = 0;
  while (g < chrono.size()) {
    std::size_t end = g;
    while (end < chrono.size() && chrono[end].first == chrono[g].first) ++end;
    std::vector<std::size_t> joined;
    for (std::size_t k = g; k < end; ++k) {
      auto& ev = plan.collections[static_cast<std::size_t>(chrono[k].second)]
                     .events[next_idx[static_cast<std::size_t>(chrono[k].second)]++];
      if (n_soph == 0) continue;
      const int m = std::min<int>(rng.integer(0, cfg.max_sophisticated_per_event), static_cast<int>(n_soph));
      std::set<std::size_t> picked;
      while (static_cast<int>(picked.size()) < m) picked.insert(static_cast<std::size_t>(rng.integer(0, static_cast<int>(n_soph) - 1)));
      for (auto s : picked) {
        ev.soph.push_back({s, done[s] >= 5, rng.integer(-23, -16)});
        joined.push_back(s);
      }
    }
    for (auto s : joined) ++done[s];
    g = end;
  }

  for (int i = 0; i < cfg.wash_loop_count; ++i) {
    const int c = rng.integer(0, n_coll - 1);
    plan.collections[static_cast<std::size_t>(c)].loops.push_back(static_cast<LoopType>(i % 5));
  }
  return plan;
}

ingest::CategoryMap make_categories() {
  ingest::CategoryMap m;
  for (int i = 0; i < kCex; ++i) m.insert(address(kCexTag, static_cast<std::uint64_t>(i)), ingest::Category::cex);
  for (int i = 0; i < kMixers; ++i) m.insert(address(kMixerTag, static_cast<std::uint64_t>(i)), ingest::Category::mixer);
  for (int i = 0; i < 8; ++i) m.insert(address(kDex, 0, static_cast<std::uint64_t>(i)), ingest::Category::dex_swap);
  for (int i = 0; i < 4; ++i) m.insert(address(kDex, 1, static_cast<std::uint64_t>(i)), ingest::Category::dex_liquidity);
  for (int i = 0; i < 4; ++i) m.insert(address(kDex, 2, static_cast<std::uint64_t>(i)), ingest::Category::lending);
  for (int i = 0; i < 4; ++i) m.insert(address(kOther, static_cast<std::uint64_t>(i)), ingest::Category::other);
  return m;
}

// Chain-side history for a wallet; sophisticated wallets get ten extra
// transactions on average.
void wallet_history(Rng& rng, const std::string& wallet, bool sophisticated, const SynthConfig& cfg,
                    const std::vector<std::string>& counterparties, std::vector<ingest::WalletTx>& out) {
  const int n = rng.poisson(15.0) + (sophisticated ? 10 : 0);
  for (int i = 0; i < n; ++i) {
    ingest::WalletTx tx;
    tx.wallet = wallet;
    tx.ts = cfg.start - static_cast<Timestamp>(rng.integer(3600, 400 * 86400));
    const bool known = rng.bernoulli(0.6);
    tx.counterparty = known ? counterparties[static_cast<std::size_t>(rng.integer(0, static_cast<int>(counterparties.size()) - 1))]
                            : address(kOther, 1000 + static_cast<std::uint64_t>(rng.integer(0, 100000)));
    tx.value_eth = std::round(-std::log(std::max(rng.uniform(), 1e-12)) * 1e4) / 1e4;
    tx.kind = known ? ingest::WalletTxKind::contract_call : ingest::WalletTxKind::transfer;
    out.push_back(std::move(tx));
  }
}

}  // namespace

SynthMarket generate_market(const SynthConfig& config, int threads) {
  validate(config);
  const MarketPlan plan = plan_market(config);

  std::vector<CollectionOutput> parts(static_cast<std::size_t>(config.n_collections));
  parallel_for(parts.size(), threads, [&](std::size_t c) {
    CollectionSim sim(config, static_cast<int>(c), plan.collections[c], plan.soph_addresses);
    parts[c] = sim.run();
  });

  SynthMarket m;
  m.categories = make_categories();
  std::set<std::string> soph_seen;
  for (auto& p : parts) {
    std::move(p.transfers.begin(), p.transfers.end(), std::back_inserter(m.transfers));
    std::move(p.funding.begin(), p.funding.end(), std::back_inserter(m.funding));
    for (auto& e : p.events) {
      for (const auto& s : e.sophisticated_participants) soph_seen.insert(s);
      m.truth.events.push_back(std::move(e));
    }
    std::move(p.wash.begin(), p.wash.end(), std::back_inserter(m.truth.wash_trades));
  }
  std::sort(m.transfers.begin(), m.transfers.end(), ingest::canonical_less);
  for (std::size_t i = 0; i < plan.soph_addresses.size(); ++i)
    m.funding.push_back({plan.soph_addresses[i], address(kPrivate, 1u << 20, i), config.start - 86400 * 200});
  std::sort(m.funding.begin(), m.funding.end(),
            [](const auto& a, const auto& b) { return a.wallet < b.wallet; });
  m.truth.sophisticated_wallets.assign(soph_seen.begin(), soph_seen.end());
  m.truth.feature_center = kCenter;
  m.truth.feature_scale = kScale;
  m.truth.wash_loops = static_cast<std::size_t>(config.wash_loop_count);

  std::vector<std::string> counterparties;
  for (const auto& [addr, cat] : m.categories.entries())
    if (cat != ingest::Category::cex && cat != ingest::Category::mixer) counterparties.push_back(addr);
  Rng rng(config.seed, 0xc0ffeeULL);
  for (const auto& s : m.truth.sophisticated_wallets) wallet_history(rng, s, true, config, counterparties, m.wallet_txs);
  for (const auto& p : parts)
    for (const auto& w : p.sample_wallets) wallet_history(rng, w, false, config, counterparties, m.wallet_txs);
  std::sort(m.wallet_txs.begin(), m.wallet_txs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.wallet, a.ts, a.counterparty, a.value_eth) < std::tie(b.wallet, b.ts, b.counterparty, b.value_eth);
  });
  return m;
}

std::string ground_truth_json(const GroundTruth& truth) {
  using nlohmann::ordered_json;
  ordered_json j;
  ordered_json feats = ordered_json::object();
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i)
    feats[std::string(kFeatureNames[i])] = {{"center", truth.feature_center[i]}, {"scale", truth.feature_scale[i]}};
  j["feature_standardization"] = feats;
  j["events"] = ordered_json::array();
  for (const auto& e : truth.events) {
    ordered_json f = ordered_json::object();
    for (std::size_t i = 0; i < kFeatureNames.size(); ++i) f[std::string(kFeatureNames[i])] = e.features.get(i);
    j["events"].push_back({{"collection", e.collection},
                           {"t0", e.t0},
                           {"t0_utc", format_utc_hour(e.t0)},
                           {"crash", e.crash},
                           {"crash_probability", e.crash_probability},
                           {"ex_post_ret", e.ex_post_ret},
                           {"peak_hour", e.peak_hour},
                           {"features", f},
                           {"sophisticated_participants", e.sophisticated_participants},
                           {"sophisticated_eligible", e.sophisticated_eligible}});
  }
  j["wash_loops"] = truth.wash_loops;
  j["wash_trades"] = ordered_json::array();
  for (const auto& w : truth.wash_trades)
    j["wash_trades"].push_back({{"tx_id", w.tx_id},
                                {"token", w.token},
                                {"collection", w.collection},
                                {"loop", std::string(to_string(w.loop))},
                                {"filters", wash::describe(w.filters)}});
  j["sophisticated_wallets"] = truth.sophisticated_wallets;
  return j.dump(1) + "\n";
}

void write_market(const SynthMarket& market, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (fs::path(dir) / name).string());
    return out;
  };
  {
    auto out = open("transfers.jsonl");
    for (const auto& t : market.transfers) out << ingest::serialize_transfer(t) << '\n';
  }
  {
    auto out = open("funding.jsonl");
    for (const auto& f : market.funding) out << ingest::serialize_funding_edge(f) << '\n';
  }
  {
    auto out = open("categories.csv");
    ingest::write_categories(out, market.categories);
  }
  {
    auto out = open("wallet_tx.jsonl");
    for (const auto& t : market.wallet_txs) out << ingest::serialize_wallet_tx(t) << '\n';
  }
  {
    auto out = open("ground_truth.json");
    out << ground_truth_json(market.truth);
  }
}

}  // namespace bubblescope::synth
