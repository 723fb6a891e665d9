#pragma once

#include "bubblescope/synth.hpp"

#include <map>

inline const bubblescope::synth::SynthMarket& bench_market(int collections) {
  static std::map<int, bubblescope::synth::SynthMarket> cache;
  auto it = cache.find(collections);
  if (it == cache.end()) {
    bubblescope::synth::SynthConfig c;
    c.n_collections = collections;
    c.n_wallets = 2000 * collections;
    c.wash_loop_count = 8 * collections;
    it = cache.emplace(collections, bubblescope::synth::generate_market(c)).first;
  }
  return it->second;
}
