#pragma once

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pda/clearing.hpp"
#include "pda/equilibrium.hpp"
#include "pda/game.hpp"
#include "pda/policies.hpp"

namespace pda {

struct DeviationSpec {
  BuyerId buyer = 0;
  std::set<int> rounds;
  Price dp;
  Quantity dq;
};

struct Scenario {
  std::string id = "scenario";
  GameConfig cfg;
  int start_round = 1;
  std::vector<Quantity> requirements;
  SupplyCurve curve;
  /// One of "mpne", "zi" or "deviate(rounds=A[-B],dp=X,dq=Y)" per buyer.
  std::vector<std::string> policies;
  std::optional<DeviationSpec> deviation;
  std::uint64_t seed = 0;

  GameState initial_state() const { return {start_round, requirements, curve}; }
};

inline std::set<int> parse_rounds(const std::string& text) {
  std::set<int> rounds;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, '|')) {
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        rounds.insert(std::stoi(part));
      } else {
        const int lo = std::stoi(part.substr(0, dash));
        const int hi = std::stoi(part.substr(dash + 1));
        for (int h = lo; h <= hi; ++h) rounds.insert(h);
      }
    } catch (const std::logic_error&) {
      throw RejectedInput("bad round list '" + text + "'");
    }
  }
  return rounds;
}

/// "deviate(rounds=1-2,dp=-5,dq=0)": the equilibrium policy shifted by
/// (dp, dq) at the listed rounds.
inline DeviationSpec parse_deviate(const std::string& text, BuyerId buyer) {
  const auto open = text.find('(');
  const auto close = text.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw RejectedInput("policies: malformed '" + text + "'");
  }
  DeviationSpec d;
  d.buyer = buyer;
  std::stringstream ss(text.substr(open + 1, close - open - 1));
  std::string kv;
  while (std::getline(ss, kv, ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw RejectedInput("policies: expected key=value in '" + text + "'");
    std::string key = kv.substr(0, eq);
    key.erase(0, key.find_first_not_of(' '));
    const std::string value = kv.substr(eq + 1);
    if (key == "rounds") {
      d.rounds = parse_rounds(value);
    } else if (key == "dp") {
      d.dp = Price::parse(value);
    } else if (key == "dq") {
      d.dq = Quantity::parse(value);
    } else {
      throw RejectedInput("policies: unknown deviation key '" + key + "'");
    }
  }
  return d;
}

inline Policy policy_from_name(const std::string& name, BuyerId buyer) {
  if (name == "mpne") return mpne_policy();
  if (name == "zi") return zi_policy();
  if (name.rfind("deviate", 0) == 0) {
    const auto d = parse_deviate(name, buyer);
    return deviation_policy(mpne_policy(), buyer, d.rounds, d.dp, d.dq);
  }
  throw RejectedInput("policies: unknown policy '" + name + "' (expected mpne, zi or deviate(...))");
}

inline PolicyProfile make_profile(const Scenario& sc) {
  PolicyProfile profile;
  for (BuyerId b = 0; b < sc.requirements.size(); ++b) {
    profile.push_back(policy_from_name(b < sc.policies.size() ? sc.policies[b] : "mpne", b));
  }
  if (sc.deviation) {
    const auto& d = *sc.deviation;
    profile.at(d.buyer) = deviation_policy(profile[d.buyer], d.buyer, d.rounds, d.dp, d.dq);
  }
  return profile;
}

/// Throws RejectedInput naming the offending field.
inline void validate_scenario(const Scenario& sc) {
  if (sc.requirements.empty()) throw RejectedInput("requirements: at least one buyer is required");
  for (std::size_t b = 0; b < sc.requirements.size(); ++b) {
    if (sc.requirements[b] < Quantity{}) {
      throw RejectedInput("requirements: buyer " + std::to_string(b) + " has a negative requirement");
    }
  }
  if (auto err = config_error(sc.cfg, sc.curve); !err.empty()) throw RejectedInput(err);
  if (sc.cfg.n_buyers != sc.requirements.size()) throw RejectedInput("requirements: buyer count mismatch");
  if (sc.start_round < 1 || sc.start_round > sc.cfg.horizon) throw RejectedInput("start_round: must lie in 1..horizon");
  if (!sc.policies.empty() && sc.policies.size() != sc.requirements.size()) {
    throw RejectedInput("policies: expected one entry per buyer");
  }
  for (BuyerId b = 0; b < sc.policies.size(); ++b) (void)policy_from_name(sc.policies[b], b);
  if (sc.deviation && sc.deviation->buyer >= sc.requirements.size()) {
    throw RejectedInput("deviation: buyer out of range");
  }
  const Quantity demand = sc.initial_state().total_requirement();
  const Quantity supply = aggregate_supply(sc.curve);
  if (demand > supply) {
    throw RejectedInput("requirements: total demand " + demand.str() + " exceeds total supply " + supply.str() +
                        " (adequate supply required)");
  }
}

namespace detail {

inline YAML::Node required(const YAML::Node& root, const char* field, const std::string& label = {}) {
  YAML::Node node = root[field];
  if (!node) throw RejectedInput((label.empty() ? std::string(field) : label) + ": missing field");
  return node;
}

template <typename D>
D decimal_field(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) throw RejectedInput(field + ": expected a number");
  try {
    return D::parse(node.Scalar());
  } catch (const std::invalid_argument& e) {
    throw RejectedInput(field + ": " + e.what());
  }
}

}  // namespace detail

inline Scenario scenario_from_yaml(const YAML::Node& root) {
  Scenario sc;
  try {
    if (root["id"]) sc.id = root["id"].as<std::string>();
    sc.cfg.horizon = detail::required(root, "horizon").as<int>();
    if (root["k"]) sc.cfg.k = detail::decimal_field<Ratio>(root["k"], "k");
    sc.cfg.p_max = detail::decimal_field<Price>(detail::required(root, "p_max"), "p_max");
    sc.cfg.balancing_price = detail::decimal_field<Price>(detail::required(root, "psi"), "psi");
    sc.cfg.beta = detail::decimal_field<Ratio>(detail::required(root, "beta"), "beta");
    if (root["start_round"]) sc.start_round = root["start_round"].as<int>();
    if (root["seed"]) sc.seed = root["seed"].as<std::uint64_t>();

    const auto req = detail::required(root, "requirements");
    if (!req.IsSequence()) throw RejectedInput("requirements: expected a list");
    for (std::size_t b = 0; b < req.size(); ++b) {
      sc.requirements.push_back(detail::decimal_field<Quantity>(req[b], "requirements[" + std::to_string(b) + "]"));
    }
    sc.cfg.n_buyers = sc.requirements.size();

    const auto asks = detail::required(root, "asks");
    if (!asks.IsSequence()) throw RejectedInput("asks: expected a list of [price, qty]");
    std::vector<Ask> list;
    for (std::size_t m = 0; m < asks.size(); ++m) {
      const std::string where = "asks[" + std::to_string(m) + "]";
      if (!asks[m].IsSequence() || asks[m].size() != 2) throw RejectedInput(where + ": expected [price, qty]");
      list.push_back({detail::decimal_field<Price>(asks[m][0], where + ".price"),
                      detail::decimal_field<Quantity>(asks[m][1], where + ".qty")});
    }
    try {
      sc.curve = SupplyCurve(std::move(list));
    } catch (const RejectedInput& e) {
      throw RejectedInput(std::string("asks: ") + e.what());
    }

    if (const auto& pol = root["policies"]) {
      for (const auto& p : pol) sc.policies.push_back(p.as<std::string>());
    }
    if (const auto& dev = root["deviation"]) {
      DeviationSpec d;
      d.buyer = detail::required(dev, "buyer", "deviation.buyer").as<std::size_t>();
      const auto rounds = detail::required(dev, "rounds", "deviation.rounds");
      if (rounds.IsSequence()) {
        for (const auto& r : rounds) d.rounds.insert(r.as<int>());
      } else {
        d.rounds = parse_rounds(rounds.Scalar());
      }
      if (dev["dp"]) d.dp = detail::decimal_field<Price>(dev["dp"], "deviation.dp");
      if (dev["dq"]) d.dq = detail::decimal_field<Quantity>(dev["dq"], "deviation.dq");
      sc.deviation = d;
    }
  } catch (const YAML::Exception& e) {
    throw RejectedInput(std::string("scenario: ") + e.what());
  }
  validate_scenario(sc);
  std::vector<Quantity> sorted = sc.requirements;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    std::clog << "warning: scenario '" << sc.id
              << "' has tied requirements; ties are broken by smaller buyer id\n";
  }
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw RejectedInput("scenario file not found: " + path.string());
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw RejectedInput(path.string() + ": " + e.what());
  }
  return scenario_from_yaml(root);
}

inline std::string scenario_to_yaml(const Scenario& sc) {
  std::ostringstream os;
  os << "id: " << sc.id << "\nhorizon: " << sc.cfg.horizon << "\nstart_round: " << sc.start_round
     << "\nk: " << sc.cfg.k << "\np_max: " << sc.cfg.p_max << "\npsi: " << sc.cfg.balancing_price
     << "\nbeta: " << sc.cfg.beta << "\nseed: " << sc.seed << "\nrequirements: [";
  for (std::size_t b = 0; b < sc.requirements.size(); ++b) os << (b ? ", " : "") << sc.requirements[b];
  os << "]\nasks:\n";
  for (const auto& a : sc.curve.asks()) os << "  - [" << a.price << ", " << a.quantity << "]\n";
  if (!sc.policies.empty()) {
    os << "policies: [";
    for (std::size_t b = 0; b < sc.policies.size(); ++b) os << (b ? ", " : "") << '"' << sc.policies[b] << '"';
    os << "]\n";
  }
  return os.str();
}

struct ExperimentResult {
  Trajectory trajectory;
  std::vector<Money> total_costs;
  std::vector<std::optional<ClearingPrice>> mcp_series;
};

inline ExperimentResult run_experiment(const Scenario& sc) {
  ExperimentResult r;
  r.trajectory = rollout(sc.initial_state(), make_profile(sc), sc.cfg, sc.seed);
  r.total_costs = r.trajectory.total_costs();
  for (const auto& s : r.trajectory.steps) r.mcp_series.push_back(s.outcome.mcp);
  return r;
}

inline void write_results_csv(std::ostream& os, const std::string& id, const ExperimentResult& r) {
  os << "scenario,buyer,auction_cost,balancing_cost,residual,total_cost\n";
  for (BuyerId b = 0; b < r.total_costs.size(); ++b) {
    const Money balancing = r.trajectory.terminal_costs[b];
    os << id << ',' << b << ',' << (r.total_costs[b] - balancing) << ',' << balancing << ','
       << r.trajectory.terminal.requirements[b] << ',' << r.total_costs[b] << '\n';
  }
}

/// Plot-ready: cumulative cost per buyer after each round (and settlement).
inline void write_cumulative_csv(std::ostream& os, const Trajectory& t) {
  os << "round,buyer,cumulative_cost\n";
  std::vector<Money> acc(t.terminal_costs.size());
  for (const auto& s : t.steps) {
    for (BuyerId b = 0; b < acc.size(); ++b) {
      acc[b] += s.costs[b];
      os << s.state.round << ',' << b << ',' << acc[b] << '\n';
    }
  }
  for (BuyerId b = 0; b < acc.size(); ++b) os << t.terminal.round << ',' << b << ',' << (acc[b] + t.terminal_costs[b]) << '\n';
}

/// Writes through a temporary file and renames, so readers never see a
/// partially written artifact.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Batches of paired PDAs

struct BatchSpec {
  Scenario base;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  BuyerId deviant = 0;
  std::string deviant_policy = "zi";
  /// Each requirement is scaled by an integer percentage drawn from this range.
  int scale_min_pct = 50;
  int scale_max_pct = 150;
};

struct BatchRow {
  std::size_t index = 0;
  std::vector<Quantity> requirements;
  std::vector<Money> baseline;
  std::vector<Money> deviant;
};

struct BatchResult {
  std::vector<BatchRow> rows;
  std::vector<double> mean_baseline, sd_baseline, mean_deviant, sd_deviant;
};

/// The i-th scenario of a batch: the base scenario with rescaled, pairwise
/// distinct requirements that the base curve can still supply.
inline Scenario batch_scenario(const BatchSpec& spec, std::size_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(i)};
  Rng rng(seq);
  std::uniform_int_distribution<int> pct(spec.scale_min_pct, spec.scale_max_pct);
  const Quantity supply = aggregate_supply(spec.base.curve);
  Scenario sc = spec.base;
  sc.id = spec.base.id + "#" + std::to_string(i);
  sc.seed = spec.seed + i;
  sc.policies.clear();
  sc.deviation.reset();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<Quantity> req;
    for (auto q : spec.base.requirements) req.push_back(fraction_floor(q, pct(rng), 100));
    std::vector<Quantity> sorted = req;
    std::sort(sorted.begin(), sorted.end());
    Quantity total;
    for (auto q : req) total += q;
    if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end() && total <= supply) {
      sc.requirements = std::move(req);
      return sc;
    }
  }
  throw std::runtime_error("batch: could not draw distinct adequate requirements for PDA " + std::to_string(i));
}

inline BatchResult run_batch(const BatchSpec& spec) {
  if (spec.count == 0) throw std::invalid_argument("batch: count must be at least 1");
  if (spec.deviant >= spec.base.requirements.size()) throw std::invalid_argument("batch: deviant buyer out of range");
  BatchResult out;
  const std::size_t n = spec.base.requirements.size();
  for (std::size_t i = 0; i < spec.count; ++i) {
    Scenario sc = batch_scenario(spec, i);
    BatchRow row;
    row.index = i;
    row.requirements = sc.requirements;
    row.baseline = run_experiment(sc).total_costs;
    sc.policies.assign(n, "mpne");
    sc.policies[spec.deviant] = spec.deviant_policy;
    row.deviant = run_experiment(sc).total_costs;
    out.rows.push_back(std::move(row));
  }
  auto stats = [&](auto member, std::vector<double>& mean, std::vector<double>& sd) {
    mean.assign(n, 0.0);
    sd.assign(n, 0.0);
    for (const auto& r : out.rows) {
      for (std::size_t b = 0; b < n; ++b) mean[b] += (r.*member)[b].to_double();
    }
    for (auto& m : mean) m /= static_cast<double>(out.rows.size());
    for (const auto& r : out.rows) {
      for (std::size_t b = 0; b < n; ++b) {
        const double d = (r.*member)[b].to_double() - mean[b];
        sd[b] += d * d;
      }
    }
    for (auto& s : sd) s = out.rows.size() > 1 ? std::sqrt(s / static_cast<double>(out.rows.size() - 1)) : 0.0;
  };
  stats(&BatchRow::baseline, out.mean_baseline, out.sd_baseline);
  stats(&BatchRow::deviant, out.mean_deviant, out.sd_deviant);
  return out;
}

inline void write_batch_csv(std::ostream& os, const BatchResult& r) {
  os << "pda,buyer,requirement,mpne_cost,deviant_cost\n";
  for (const auto& row : r.rows) {
    for (BuyerId b = 0; b < row.baseline.size(); ++b) {
      os << row.index << ',' << b << ',' << row.requirements[b] << ',' << row.baseline[b] << ',' << row.deviant[b]
         << '\n';
    }
  }
}

inline void write_batch_summary_csv(std::ostream& os, const BatchResult& r) {
  os << "buyer,mean_mpne,sd_mpne,mean_deviant,sd_deviant\n" << std::fixed << std::setprecision(6);
  for (BuyerId b = 0; b < r.mean_baseline.size(); ++b) {
    os << b << ',' << r.mean_baseline[b] << ',' << r.sd_baseline[b] << ',' << r.mean_deviant[b] << ','
       << r.sd_deviant[b] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Random small scenarios for property sweeps

struct RandomScenarioBounds {
  std::size_t max_buyers = 4;
  int max_horizon = 6;
  std::size_t max_asks = 8;
  int max_price = 20;
  int max_quantity = 20;
  /// Psi = psi_factor * p_max.
  Ratio psi_factor = Ratio::from_int(2);
  Ratio beta = Ratio::parse("1.5");
  std::size_t min_buyers = 1;
  int min_horizon = 1;
};

/// Integer data, strictly increasing ask prices, pairwise distinct positive
/// requirements and adequate supply; p_max sits 1..5 above the top ask.
inline Scenario random_scenario(Rng& rng, const RandomScenarioBounds& bounds) {
  auto uniform = [&](long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(rng); };
  for (;;) {
    Scenario sc;
    sc.cfg.horizon = static_cast<int>(uniform(bounds.min_horizon, bounds.max_horizon));
    const auto m = static_cast<std::size_t>(uniform(1, static_cast<long>(std::min<std::size_t>(
                                                          bounds.max_asks, static_cast<std::size_t>(bounds.max_price)))));
    std::vector<long> prices;
    while (prices.size() < m) {
      const long p = uniform(1, bounds.max_price);
      if (std::find(prices.begin(), prices.end(), p) == prices.end()) prices.push_back(p);
    }
    std::sort(prices.begin(), prices.end());
    std::vector<Ask> asks;
    long supply = 0;
    for (long p : prices) {
      const long q = uniform(1, bounds.max_quantity);
      supply += q;
      asks.push_back({Price::from_int(p), Quantity::from_int(q)});
    }
    const auto n = static_cast<std::size_t>(uniform(static_cast<long>(bounds.min_buyers), static_cast<long>(bounds.max_buyers)));
    std::set<long> reqs;
    long demand = 0;
    for (int attempt = 0; reqs.size() < n && attempt < 100; ++attempt) {
      const long q = uniform(1, bounds.max_quantity);
      if (!reqs.contains(q)) {
        reqs.insert(q);
        demand += q;
      }
    }
    if (reqs.size() < n || demand > supply) continue;
    std::vector<long> order(reqs.begin(), reqs.end());
    std::shuffle(order.begin(), order.end(), rng);
    for (long q : order) sc.requirements.push_back(Quantity::from_int(q));
    sc.curve = SupplyCurve(std::move(asks));
    sc.cfg.n_buyers = n;
    sc.cfg.p_max = Price::from_int(prices.back() + uniform(1, 5));
    sc.cfg.beta = bounds.beta;
    sc.cfg.balancing_price = (bounds.psi_factor * sc.cfg.p_max).narrow_exact<kBaseScale>();
    sc.seed = rng();
    return sc;
  }
}

}  // namespace pda
