#pragma once

#include <cstdint>
#include <string>

#include "underlap/dataset.hpp"

namespace underlap {

// Built-in benchmark generators. A and B are regression surfaces with
// covariate-independent partitions, C1/C2 are two-component regression
// mixtures over one continuous and one binary covariate, D is a
// twenty-covariate gated regression where only the first covariate matters.
enum class ExampleId { A, B, C1, C2, D };

ExampleId parse_example_id(const std::string& name);
std::string example_name(ExampleId id);

// The sample size each example uses by default.
int example_default_n(ExampleId id);

// Draws n rows from the given generator. The response column is named "y";
// covariates are "x" (A), "x1","x2" (B), "x_c","x_d" (C1/C2, with x_d
// categorical on levels "1","2"), or "x1".."x20" (D). Requires n >= 10.
MixedDataset simulate_example(ExampleId id, int n, std::uint64_t seed);

}  // namespace underlap
