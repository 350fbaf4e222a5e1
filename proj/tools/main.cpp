#include "hvtrack/cli.hpp"

int main(int argc, char** argv) { return hvt::cli::run(argc, argv); }
