#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace microfarm::cli {

// Runs the command line; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace microfarm::cli
