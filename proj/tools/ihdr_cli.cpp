// Batch command-line interface for the intrinsic HDR toolkit.
//
// Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 numerical
// failure. Each failure prints one line: "ihdr: error: <kind>: <reason>".

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ihdr/gradcheck_suite.hpp"
#include "ihdr/ihdr.hpp"

namespace fs = std::filesystem;
using namespace ihdr;

namespace {

constexpr std::uint64_t kExposureSeedSalt = 0x9e3779b97f4a7c15ull;

struct SimulateArgs {
    int seeds = 4;
    std::string out_dir;
    std::string t_range = "-3,3";
    double gamma = 2.2;
    int bits = 8;
    int size = 64;
};

std::pair<double, double> parse_range(const std::string& spec) {
    const auto comma = spec.find(',');
    if (comma == std::string::npos)
        throw InvalidArgument("t-range must look like 'lo,hi'");
    const double lo = std::stod(spec.substr(0, comma));
    const double hi = std::stod(spec.substr(comma + 1));
    if (!(lo <= hi)) throw InvalidArgument("t-range bounds out of order");
    return {lo, hi};
}

int run_simulate(const SimulateArgs& args) {
    const auto [t_lo, t_hi] = parse_range(args.t_range);
    const fs::path dir(args.out_dir);
    fs::create_directories(dir);
    std::vector<ManifestRecord> records;
    for (int i = 0; i < args.seeds; ++i) {
        const auto seed = static_cast<std::uint64_t>(i);
        SyntheticScene scene = generate_scene(seed, args.size, args.size);
        Rng exposure_rng(seed ^ kExposureSeedSalt);
        IspParams p{exposure_rng.uniform(t_lo, t_hi), args.gamma, args.bits};
        LdrSimulation sim = simulate_ldr(scene, p);
        LdrIntrinsics intr = oracle_ldr_decomposition(scene, p);

        const std::string stem = "sample_" + std::to_string(i);
        ManifestRecord r;
        r.seed = seed;
        r.t = p.exposure_stops;
        r.gamma = p.crf_gamma;
        r.bit_depth = p.bit_depth;
        r.height = args.size;
        r.width = args.size;
        r.ldr_png = stem + ".png";
        r.linear_pfm = stem + ".linear.pfm";
        r.hdr_gt_pfm = stem + ".hdr.pfm";
        r.albedo_gt_pfm = stem + ".albedo.pfm";
        r.shading_gt_pfm = stem + ".shading.pfm";
        r.albedo_ldr_pfm = stem + ".albedo_ldr.pfm";
        r.shading_ldr_pfm = stem + ".shading_ldr.pfm";

        write_png(dir / r.ldr_png, sim.ldr);
        write_pfm(dir / r.linear_pfm, sim.linearized);
        write_pfm(dir / r.hdr_gt_pfm, scene.hdr_gt);
        write_pfm(dir / r.albedo_gt_pfm, scene.albedo_gt.image());
        write_pfm(dir / r.shading_gt_pfm, scene.shading_gt.image());
        write_pfm(dir / r.albedo_ldr_pfm, intr.albedo_ldr.image());
        write_pfm(dir / r.shading_ldr_pfm, intr.shading_ldr.image());
        records.push_back(std::move(r));
    }
    write_manifest(dir / "manifest.jsonl", records);
    std::cout << "wrote " << records.size() << " samples to " << dir.string() << "\n";
    return 0;
}

SyntheticScene scene_from_record(const fs::path& dir, const ManifestRecord& r) {
    Image albedo = read_pfm(dir / r.albedo_gt_pfm);
    Image shading = read_pfm(dir / r.shading_gt_pfm);
    Image hdr = read_pfm(dir / r.hdr_gt_pfm);
    return {AlbedoMap(std::move(albedo)), ShadingMap(std::move(shading)), std::move(hdr), r.seed};
}

struct TrainArgs {
    std::string role;
    std::string data_dir;
    int steps = 500;
    double lr = 1e-4;
    std::uint64_t seed = 0;
    int batch = 1;
    std::string ckpt;
    std::string upstream_dir; // refinement only
};

int run_train(const TrainArgs& args) {
    const NetRole role = role_from_name(args.role);
    const fs::path dir(args.data_dir);
    const std::vector<ManifestRecord> records = read_manifest(dir / "manifest.jsonl");
    if (records.empty()) throw ParseError("train: empty manifest");

    std::optional<ToyNet> shading_net;
    std::optional<ToyNet> albedo_net;
    if (role == NetRole::refinement) {
        if (args.upstream_dir.empty())
            throw InvalidArgument("train: refinement needs --ckpts with the upstream checkpoints");
        shading_net = load_checkpoint(fs::path(args.upstream_dir) / "shading.ckpt");
        albedo_net = load_checkpoint(fs::path(args.upstream_dir) / "albedo.ckpt");
    }

    std::vector<TrainSample> data;
    data.reserve(records.size());
    for (const ManifestRecord& r : records) {
        SyntheticScene scene = scene_from_record(dir, r);
        IspParams p{r.t, r.gamma, r.bit_depth};
        data.push_back(make_sample(role, scene, p,
                                   shading_net ? &*shading_net : nullptr,
                                   albedo_net ? &*albedo_net : nullptr));
    }

    ToyNet net = ToyNet::build(role, args.seed);
    TrainConfig cfg;
    cfg.learning_rate = args.lr;
    cfg.steps = args.steps;
    cfg.batch = args.batch;
    cfg.seed = args.seed;
    TrainResult result = train(net, data, cfg);

    save_checkpoint(args.ckpt, net);
    const fs::path curve_path = fs::path(args.ckpt).string() + ".loss.csv";
    std::ofstream curve(curve_path);
    curve << "step,loss\n";
    curve.precision(17);
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i)
        curve << i << ',' << result.loss_curve[i] << '\n';
    std::cout << "trained " << args.role << " for " << args.steps << " steps; checkpoint "
              << args.ckpt << "\n";
    if (!result.loss_curve.empty())
        std::cout << "loss " << result.loss_curve.front() << " -> " << result.loss_curve.back()
                  << "\n";
    return 0;
}

struct ReconstructArgs {
    std::string ldr_path;
    std::string ckpt_dir;
    std::string out_prefix;
    std::string albedo_ldr;
    std::string shading_ldr;
    double gamma = 2.2;
};

Image load_linear_ldr(const fs::path& path, double gamma) {
    if (path.extension() == ".pfm") {
        Image img = read_pfm(path);
        for (double v : img.data())
            if (v < 0.0 || v > 1.0)
                throw ParseError("reconstruct: linear LDR values must lie in [0, 1]");
        return img;
    }
    if (path.extension() == ".png") {
        LdrImage ldr = read_png(path);
        Image out(ldr.height, ldr.width, 3);
        const double cap = ldr.max_code();
        for (std::size_t i = 0; i < ldr.data.size(); ++i)
            out.data()[i] = std::pow(ldr.data[i] / cap, gamma);
        return out;
    }
    throw ParseError("reconstruct: expected a .png or .pfm LDR input");
}

int run_reconstruct(const ReconstructArgs& args) {
    const Image ldr_linear = load_linear_ldr(args.ldr_path, args.gamma);
    ReconstructionInputs in = [&] {
        if (!args.albedo_ldr.empty() || !args.shading_ldr.empty()) {
            if (args.albedo_ldr.empty() || args.shading_ldr.empty())
                throw InvalidArgument("reconstruct: give both --albedo-ldr and --shading-ldr");
            Image a = read_pfm(args.albedo_ldr);
            Image s = read_pfm(args.shading_ldr);
            Image d(s.height(), s.width(), 1);
            for (std::size_t i = 0; i < s.size(); ++i) d.data()[i] = 1.0 / (s.data()[i] + 1.0);
            Image mask = mask_channel_max(soft_mask(ldr_linear));
            return ReconstructionInputs{ldr_linear, std::move(d), std::move(a), std::move(mask)};
        }
        return make_reconstruction_inputs(ldr_linear);
    }();

    const fs::path dir(args.ckpt_dir);
    ToyNet shading_net = load_checkpoint(dir / "shading.ckpt");
    ToyNet albedo_net = load_checkpoint(dir / "albedo.ckpt");
    ToyNet refine_net = load_checkpoint(dir / "refinement.ckpt");
    Reconstruction rec = reconstruct(in, shading_net, albedo_net, refine_net);

    write_pfm(args.out_prefix + ".d_hdr.pfm", rec.d_hdr);
    write_pfm(args.out_prefix + ".a_hdr.pfm", rec.a_hdr);
    write_pfm(args.out_prefix + ".initial_hdr.pfm", rec.initial_hdr);
    write_pfm(args.out_prefix + ".final_hdr.pfm", rec.final_hdr);
    std::cout << "wrote " << args.out_prefix << ".{d_hdr,a_hdr,initial_hdr,final_hdr}.pfm\n";
    return 0;
}

Image load_hdr_image(const fs::path& path) {
    if (path.extension() == ".pfm") return read_pfm(path);
    if (path.extension() == ".hdr") return read_rgbe(path);
    throw ParseError("evaluate: expected a .pfm or .hdr image");
}

int run_evaluate(const std::string& pred_path, const std::string& gt_path,
                 const std::string& report_path) {
    const Image pred = load_hdr_image(pred_path);
    const Image gt = load_hdr_image(gt_path);
    EvalReport report = evaluate(pred, gt, fs::path(pred_path).filename().string());
    std::vector<EvalReport> reports{report};
    fs::path json_path(report_path);
    fs::path csv_path(report_path);
    csv_path.replace_extension(".csv");
    if (json_path.extension() != ".json") json_path += ".json";
    write_report_json(json_path, reports);
    write_report_csv(csv_path, reports);
    std::cout << "scale " << report.scale << ", pu21_psnr ";
    if (std::isinf(report.pu21_psnr))
        std::cout << "inf";
    else
        std::cout << report.pu21_psnr;
    std::cout << " dB, rmse " << report.rmse_linear << "\n";
    return 0;
}

int run_gradcheck(std::uint64_t seed) {
    double worst = 0.0;
    for (const GradCheckCase& c : run_gradcheck_suite(seed)) {
        std::printf("%-14s max rel err %.3e\n", c.name.c_str(), c.max_rel_err);
        worst = std::max(worst, c.max_rel_err);
    }
    if (worst >= 1e-5) {
        std::cerr << "ihdr: error: numerical: gradient check failed, max rel err " << worst
                  << "\n";
        return 3;
    }
    std::cout << "gradient check passed (max rel err " << worst << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"intrinsic-domain HDR reconstruction toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic LDR/HDR dataset");
    simulate->add_option("--seeds", sim.seeds, "number of scenes")->required();
    simulate->add_option("--out", sim.out_dir, "output directory")->required();
    simulate->add_option("--t-range", sim.t_range, "exposure range in stops, 'lo,hi'");
    simulate->add_option("--gamma", sim.gamma, "CRF gamma");
    simulate->add_option("--bits", sim.bits, "LDR bit depth");
    simulate->add_option("--size", sim.size, "scene side length (multiple of 4)");

    TrainArgs tr;
    CLI::App* train_cmd = app.add_subcommand("train", "train one pipeline stage");
    train_cmd->add_option("--role", tr.role, "shading | albedo | refinement")->required();
    train_cmd->add_option("--data", tr.data_dir, "dataset directory with manifest.jsonl")->required();
    train_cmd->add_option("--steps", tr.steps, "optimizer steps");
    train_cmd->add_option("--lr", tr.lr, "initial learning rate");
    train_cmd->add_option("--seed", tr.seed, "init and sampling seed");
    train_cmd->add_option("--batch", tr.batch, "batch size");
    train_cmd->add_option("--ckpt", tr.ckpt, "checkpoint output path")->required();
    train_cmd->add_option("--ckpts", tr.upstream_dir,
                          "directory with shading.ckpt/albedo.ckpt (refinement role)");

    ReconstructArgs rc;
    CLI::App* reconstruct_cmd = app.add_subcommand("reconstruct", "run the three-stage pipeline");
    reconstruct_cmd->add_option("--ldr", rc.ldr_path, "input LDR (.png or linear .pfm)")->required();
    reconstruct_cmd->add_option("--ckpts", rc.ckpt_dir, "checkpoint directory")->required();
    reconstruct_cmd->add_option("--out", rc.out_prefix, "output path prefix")->required();
    reconstruct_cmd->add_option("--albedo-ldr", rc.albedo_ldr, "LDR albedo .pfm (optional)");
    reconstruct_cmd->add_option("--shading-ldr", rc.shading_ldr, "LDR shading .pfm (optional)");
    reconstruct_cmd->add_option("--gamma", rc.gamma, "CRF gamma for .png linearization");

    std::string ev_pred, ev_gt, ev_report;
    CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "score a reconstruction");
    evaluate_cmd->add_option("--pred", ev_pred, "prediction (.pfm or .hdr)")->required();
    evaluate_cmd->add_option("--gt", ev_gt, "ground truth (.pfm or .hdr)")->required();
    evaluate_cmd->add_option("--report", ev_report, "report path (JSON; CSV beside it)")->required();

    std::uint64_t gc_seed = 0;
    CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck_cmd->add_option("--seed", gc_seed, "instance seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        std::cerr << "ihdr: error: usage: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*simulate) return run_simulate(sim);
        if (*train_cmd) return run_train(tr);
        if (*reconstruct_cmd) return run_reconstruct(rc);
        if (*evaluate_cmd) return run_evaluate(ev_pred, ev_gt, ev_report);
        if (*gradcheck_cmd) return run_gradcheck(gc_seed);
    } catch (const InvalidArgument& e) {
        std::cerr << "ihdr: error: usage: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "ihdr: error: data: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "ihdr: error: numerical: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "ihdr: error: data: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
