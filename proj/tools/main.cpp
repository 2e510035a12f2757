#include "cli.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

int main(int argc, char** argv)
{
    // Keep stdout for command output; diagnostics go to stderr.
    spdlog::set_default_logger(spdlog::stderr_logger_st("tsgmm"));
    spdlog::set_pattern("%l: %v");
    spdlog::set_level(spdlog::level::warn);
    std::vector<std::string> args(argv + 1, argv + argc);
    return tsgmm::cli::run(args, std::cout, std::cerr);
}
