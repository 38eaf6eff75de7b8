#include "facet/cli.hpp"

int main(int argc, char** argv) { return facet::cli::run(argc, argv); }
