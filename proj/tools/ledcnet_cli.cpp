#include "ledcnet/cli/run.hpp"

int main(int argc, char** argv) { return ledcnet::cli::run(argc, argv); }
