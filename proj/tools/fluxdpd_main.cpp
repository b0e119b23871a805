// fluxdpd: command-line front end for the flux-line predistortion toolkit.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "fluxdpd/diagnostics.hpp"
#include "fluxdpd/pipeline.hpp"

namespace {

struct Subcommand {
    const char* name;
    const char* help;
};

constexpr Subcommand kCommands[] = {
    {"simulate-distortion", "Distort, predistort and correct a step for each configured model"},
    {"cryoscope", "Simulate the Ramsey-style cryoscope trace of a distorted step"},
    {"reconstruct", "Recover the flux step response from a cryoscope trace (--trace)"},
    {"spectroscopy", "Simulate a flux-spectroscopy map"},
    {"fit-spectroscopy", "Extract peaks from a map (--map) and fit the transmon model"},
    {"design-dpd", "Design IIR (and FIR) predistortion for a measured step (--response)"},
    {"calibrate", "Full loop: simulate, reconstruct, design both stages, verify"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flux-line digital predistortion toolkit", "fluxdpd"};
    app.set_version_flag("--version", fluxdpd::pipeline::tool_version());
    app.require_subcommand(1);

    fluxdpd::pipeline::CommandOptions options;
    std::uint64_t seed = 0;
    std::string selected;

    for (const auto& c : kCommands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", options.config, "JSON config file")->required();
        sub->add_option("--out", options.out, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Override the noise seed");
        sub->add_flag("--verbose", options.verbose, "Progress messages on stderr");
        if (std::string(c.name) == "reconstruct")
            sub->add_option("--trace", options.trace, "Cryoscope trace CSV (tau_s,p_x,p_y)")->required();
        if (std::string(c.name) == "fit-spectroscopy")
            sub->add_option("--map", options.map, "Spectroscopy map CSV")->required();
        if (std::string(c.name) == "design-dpd")
            sub->add_option("--response", options.response, "Measured step response CSV")->required();
        sub->callback([&selected, sub] { selected = sub->get_name(); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : fluxdpd::pipeline::kExitConfig;
    }

    for (auto* sub : app.get_subcommands()) {
        if (sub->count("--seed") > 0) options.seed = seed;
    }

    fluxdpd::ScopedWarningHandler warnings([](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; });
    return fluxdpd::pipeline::run_command(selected, options, std::cerr);
}
