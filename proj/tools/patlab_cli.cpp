#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "patlab/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Photoacoustic tomography with variable sound speed: forward runs, reconstruction and diagnostics"};
  app.require_subcommand(1, 1);

  patlab::RunOptions opt;
  int stride = -1;
  for (const std::string& name : patlab::subcommand_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config, "Scenario JSON")->required();
    sub->add_option("--out", opt.out, "Output directory")->required();
    sub->add_option("--threads", opt.threads, "Worker threads for sweep rows")->check(CLI::PositiveNumber);
    sub->add_flag("--emit-gnuplot", opt.emit_gnuplot, "Write gnuplot scripts next to the CSV files");
    sub->add_option("--snapshot-stride", stride, "Write a PGM of u every k steps (forward)")
        ->check(CLI::NonNegativeNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? patlab::kExitOk : patlab::kExitError;
  }
  if (stride >= 0) opt.snapshot_stride = stride;
  return patlab::run_subcommand(app.get_subcommands().front()->get_name(), opt, std::cerr);
}
