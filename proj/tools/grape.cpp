#include <grape/cli.hpp>

int main(int argc, char** argv) { return grape::cli::run(argc, argv); }
