#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fta/matrix.hpp"
#include "fta/model.hpp"

namespace fta {

// Desk-scale example configs loosely shaped after common transformer
// workload classes (encoder-only, vision, speech encoder-decoder,
// translation). They are toys for exercising the pipeline, not any published
// model.

std::vector<std::string> fixture_names();

ModelSpec fixture_model(const std::string& name);

// Dense per-section weights (16b fixed point at frac_bits), deterministic in
// the seed. Section order matches model.sections().
std::vector<IntMatrix> fixture_dense_weights(const ModelSpec& model, uint64_t seed,
                                             int frac_bits);

// Per-inference token counts for the shipped trace.
std::vector<int> fixture_trace(const std::string& name);

// Deterministic input activations for a trace entry.
IntMatrix make_input(int length, int width, int activation_bits, int frac_bits,
                     uint64_t seed);

struct FixtureFiles {
  std::filesystem::path model_json;
  std::filesystem::path weights_dir;
  std::filesystem::path trace_file;
};

// Writes model.json, weights/s###.mat and trace.txt under dir/<name>/.
FixtureFiles write_fixture(const std::filesystem::path& dir, const std::string& name,
                           uint64_t seed, int frac_bits);

}  // namespace fta
