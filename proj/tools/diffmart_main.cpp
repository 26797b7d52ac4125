#include <diffmart/cli.hpp>

int main(int argc, char** argv) { return diffmart::run_cli(argc, argv); }
