// Plants a sparse interaction structure behind an oracle, recovers it
// exhaustively, and shows how well the top concepts reconstruct the outputs.

#include <algorithm>
#include <cstdio>

#include "harsanyi/harsanyi.hpp"

int main() {
  using namespace harsanyi;

  PlantedConfig config;
  config.n = 12;
  config.salient_count = 10;
  config.seed = 2023;
  config.background_count = 150;
  config.background_ceiling = 0.05;
  PlantedModel model(config);

  const ValueTable values = evaluate_all(model);
  const InteractionTable interactions = mobius_inverse(values);
  const PlayerSet players = PlayerSet::numbered(config.n);

  std::printf("top concepts of %zu masked samples\n", values.size());
  const auto top = extract_salient(interactions, 10);
  int width = 0;
  for (const auto& e : top) width = std::max(width, static_cast<int>(players.render(e.mask).size()));
  for (const auto& e : top) {
    std::printf("  %-*s %8.4f\n", width, players.render(e.mask).c_str(), e.effect);
  }

  for (std::size_t m : {5, 10, 50, 160}) {
    const auto curve = matching_curve(values, interactions, m);
    std::printf("M=%-4zu mean windowed RMSE %.6f\n", m, curve.mean_rmse());
  }
}
