// Generates the bundled synthetic paired dataset used by the examples and
// the acceptance pipeline.
#include <CLI11.hpp>

#include <iostream>

#include "ps2man/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"write a procedurally generated photo/sketch dataset"};
  std::string out = "synthetic_data";
  int count = 16;
  uint64_t seed = 7;
  app.add_option("--out", out, "output directory");
  app.add_option("--count", count, "number of identities");
  app.add_option("--seed", seed, "texture seed");
  CLI11_PARSE(app, argc, argv);

  ps2man::make_synthetic_dataset(out, count, seed);
  std::cout << "wrote " << count << " paired samples under " << out << "\n";
  return 0;
}
