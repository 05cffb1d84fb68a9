#include "irmesh/cli.hpp"

int main(int argc, char** argv) { return irmesh::run_cli(argc, argv); }
