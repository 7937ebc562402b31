#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "condflow/data/trajectory.hpp"
#include "condflow/io/config.hpp"

namespace condflow::cli {

// Parses the command line and runs one subcommand. Returns the process exit
// code; failures print one "error <CODE>: <message>" line to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 0 on success; nonzero per error family.
int exit_code(const std::string& error_code);

struct Datasets {
    data::TrajectoryBatch train;
    data::TrajectoryBatch test;
};

// Generated from the seed for synthetic sources, read from CSV otherwise.
// Raw (unnormalized) coordinates.
Datasets load_datasets(const io::RunConfig& cfg);

// Model settings implied by the data section (grid features).
model::ModelConfig effective_model(const io::RunConfig& cfg);

}  // namespace condflow::cli
