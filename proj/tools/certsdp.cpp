#include "cli.hpp"

int main(int argc, char** argv) { return certsdp::cli::run(argc, argv); }
