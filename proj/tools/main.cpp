#include "commands.hpp"
#include "config.hpp"

#include "hartree/nbody.hpp"

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <fftw3.h>
#include <openssl/evp.h>

#include <Eigen/Core>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace hartree::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string sha256(const std::string& text) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr);
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

json versions() {
    std::ostringstream eigen, boost;
    eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
    boost << BOOST_VERSION / 100000 << '.' << BOOST_VERSION / 100 % 1000 << '.' << BOOST_VERSION % 100;
    return {{"eigen", eigen.str()}, {"boost", boost.str()}, {"fftw", std::string(fftw_version)}, {"compiler", __VERSION__}};
}

// manifest.json holds one entry per subcommand; rerunning a subcommand replaces its entry.
void write_manifest(const Context& ctx, const std::string& cmd, const std::string& status, int code) {
    const fs::path p = ctx.out / "manifest.json";
    json m = json::object();
    if (fs::exists(p)) {
        std::ifstream in(p);
        try {
            m = json::parse(in);
        } catch (const json::exception&) {
            m = json::object();
        }
    }
    m[cmd] = {{"config_sha256", sha256(ctx.cfg.canonical())}, {"seed", ctx.seed},     {"threads", ctx.threads},
              {"versions", versions()},                     {"status", status},     {"exit_code", code},
              {"artifacts", ctx.artifacts}};
    std::ofstream out(p);
    out << std::setw(2) << m << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multisoliton toolkit for the 3D gravitational Hartree equation"};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path, out_dir = "";
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    int threads = 1, order = -1;
    app.add_option("-c,--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", overrides, "override one key, section.key=value (repeatable)");
    app.add_option("--out", out_dir, "output directory (default: output.dir)");
    app.add_option("--seed", seed, "seed for the randomized checks");
    app.add_option("--threads", threads, "worker threads (recorded; the kernels run on one thread)")->check(CLI::PositiveNumber);
    app.add_option("--N", order, "expansion order N (trajectory, profiles; residual when N <= 2)")->check(CLI::Range(0, 3));

    const std::map<std::string, std::string> help = {
        {"groundstate", "solve for Q and write ground_state.gsq1"},
        {"nbody", "integrate the point-mass system and fit separation rates"},
        {"trajectory", "Picard iteration for the corrected trajectory"},
        {"profile", "build the correction profiles"},
        {"residual", "residual decay against separation"},
        {"evolve", "standing-wave or backward multisoliton evolution"},
        {"fit", "modulation fit round trips on seeded random pairs"},
        {"coercivity", "spectra of the linearized operators and G on orthogonal perturbations"},
        {"report", "collect every summary into report.json / report.md"},
        {"validate", "check the configuration and exit"}};
    for (const auto& name : subcommands()) app.add_subcommand(name, help.at(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    Context ctx;
    try {
        ctx.cfg = config_path.empty() ? Config() : Config::load(config_path);
        for (const auto& s : overrides) ctx.cfg.set(s);
        if (order >= 0) {
            ctx.cfg.set("trajectory.N", std::to_string(order));
            ctx.cfg.set("profiles.N", std::to_string(order));
            // the semianalytic residual covers radial profiles only
            if (order <= 2) ctx.cfg.set("residual.orders", std::to_string(order));
        }
        auto problems = ctx.cfg.validate(cmd);
        for (const auto& k : ctx.cfg.unknown) problems.push_back("unknown key " + k);
        if (!problems.empty()) {
            for (const auto& p : problems) std::cerr << "invalid configuration: " << p << "\n";
            return 2;
        }
    } catch (const ValidationError& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const hartree::ConfigError& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return 2;
    }
    if (cmd == "validate") {
        std::cout << "configuration ok (sha256 " << sha256(ctx.cfg.canonical()) << ")\n";
        return 0;
    }

    ctx.out = out_dir.empty() ? fs::path(ctx.cfg.str("output.dir")) : fs::path(out_dir);
    ctx.seed = seed;
    ctx.threads = threads;
    fs::create_directories(ctx.out);

    int code = 0;
    std::string status = "ok";
    try {
        std::clog << cmd << ": output in " << ctx.out.string() << "\n";
        code = run_subcommand(cmd, ctx);
        if (code != 0) status = "checks failed";
    } catch (const ValidationError& e) {
        std::cerr << cmd << ": invalid configuration: " << e.what() << "\n";
        code = 2;
        status = std::string("invalid: ") + e.what();
    } catch (const hartree::ConfigError& e) {
        std::cerr << cmd << ": invalid configuration: " << e.what() << "\n";
        code = 2;
        status = std::string("invalid: ") + e.what();
    } catch (const DependencyError& e) {
        std::cerr << cmd << ": " << e.what() << "\n";
        code = 3;
        status = std::string("missing dependency: ") + e.what();
    } catch (const std::exception& e) {
        std::cerr << cmd << ": " << e.what() << "\n";
        code = 4;
        status = std::string("error: ") + e.what();
    }
    write_manifest(ctx, cmd, status, code);
    return code;
}
