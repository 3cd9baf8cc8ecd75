#include "metaexo/cli/commands.hpp"

int main(int argc, char** argv) { return metaexo::cli::run_cli(argc, argv); }
