#include <monoent/cli.hpp>

int main(int argc, char** argv) { return monoent::cli::run(argc, argv, std::cout, std::cerr); }
