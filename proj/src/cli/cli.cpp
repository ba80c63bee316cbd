#include "isfm/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "isfm/bench.hpp"
#include "isfm/color.hpp"
#include "isfm/hash.hpp"
#include "isfm/image_io.hpp"
#include "isfm/losses.hpp"
#include "isfm/metrics.hpp"
#include "isfm/net.hpp"
#include "isfm/parallel.hpp"
#include "isfm/weights.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace isfm::cli {

namespace {

/// Failure carrying the exit code it maps to.
struct CommandError : std::runtime_error {
    CommandError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
    int code;
};

struct FuseArgs {
    std::string ir;
    std::string vi;
    std::string out;
    std::string weights;
    std::uint64_t seed = 42;
    std::size_t channels = 128;
    std::size_t num_vssm = 2;
    bool no_mff = false;
    bool no_fgg = false;
    bool no_fgm = false;
    bool gray = false;
};

struct EvalArgs {
    std::string pairs_dir;
    std::string fused_dir;
    std::string out;
    std::string format = "csv";
    std::string rank;
    std::string tie = "average";
};

struct BenchArgs {
    std::string op = "scan";
    std::vector<std::size_t> sizes;
    std::size_t repeats = 3;
    std::string out;
    std::size_t channels = 16;
    std::uint64_t seed = 1;
};

struct InitArgs {
    std::string out;
    std::uint64_t seed = 42;
    std::size_t channels = 128;
    std::size_t num_vssm = 2;
};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << v;
    return os.str();
}

std::string shape_text(const Tensor& t) {
    std::ostringstream os;
    os << t.height() << "x" << t.width();
    if (t.channels() != 1) os << "x" << t.channels();
    return os.str();
}

Tensor read_or_throw(const std::string& path) {
    try {
        return read_image(path);
    } catch (const ImageError& e) {
        throw CommandError(kExitData, e.what());
    }
}

Tensor luma(const Tensor& img) { return img.channels() == 3 ? rgb_to_ycbcr(img).y : img; }

int cmd_fuse(const FuseArgs& a, std::ostream& out, std::ostream& err) {
    const Tensor ir_img = read_or_throw(a.ir);
    const Tensor vi_img = read_or_throw(a.vi);
    if (ir_img.height() != vi_img.height() || ir_img.width() != vi_img.width()) {
        throw CommandError(kExitUsage, "size mismatch: infrared image " + a.ir + " is " + shape_text(ir_img) +
                                           ", visible image " + a.vi + " is " + shape_text(vi_img));
    }
    if (ir_img.channels() == 3) err << "warning: infrared image has color; using its luma\n";

    ModalityPair pair;
    pair.ir = luma(ir_img);
    if (vi_img.channels() == 3) {
        YCbCr ycc = rgb_to_ycbcr(vi_img);
        pair.vi_y = std::move(ycc.y);
        pair.vi_cb = std::move(ycc.cb);
        pair.vi_cr = std::move(ycc.cr);
    } else {
        pair.vi_y = vi_img;
        pair.vi_cb = Tensor::full(vi_img.shape(), 0.5f);
        pair.vi_cr = Tensor::full(vi_img.shape(), 0.5f);
    }

    WeightArchive archive;
    IsfmConfig cfg;
    if (!a.weights.empty()) {
        try {
            archive = load_weights(a.weights);
            cfg = infer_config(archive);
        } catch (const ArchiveError& e) {
            throw CommandError(kExitData, e.what());
        } catch (const ConfigError& e) {
            throw CommandError(kExitData, std::string("incomplete weights: ") + e.what());
        }
    } else {
        cfg.channels = a.channels;
        cfg.num_vssm = a.num_vssm;
        archive = init_weights(cfg, a.seed);
    }
    cfg.enable_mff = !a.no_mff;
    cfg.enable_fgg = !a.no_fgg;
    cfg.enable_fgm = !a.no_fgm;
    IsfmWeights w;
    try {
        w = bind_weights(archive, cfg);
    } catch (const ConfigError& e) {
        throw CommandError(kExitData, std::string("incomplete weights: ") + e.what());
    }

    const Tensor fused = isfm_forward(pair, w, cfg);
    const bool gray = a.gray || fs::path(a.out).extension() == ".pgm";
    try {
        write_image(a.out, gray ? fused : fuse_color(fused, pair.vi_cb, pair.vi_cr));
    } catch (const ImageError& e) {
        throw CommandError(kExitData, e.what());
    }

    const LossBreakdown loss = loss_total(fused, pair.ir, pair.vi_y);
    json j;
    j["command"] = "fuse";
    j["output"] = a.out;
    j["height"] = fused.height();
    j["width"] = fused.width();
    j["config"] = {{"channels", cfg.channels}, {"num_vssm", cfg.num_vssm},   {"expansion", cfg.expansion},
                   {"mff", cfg.enable_mff},    {"fgg", cfg.enable_fgg},      {"fgm", cfg.enable_fgm}};
    j["weights"] = a.weights.empty() ? json("seed:" + std::to_string(a.seed)) : json(a.weights);
    j["loss"] = {{"cont", loss.cont},
                 {"int", loss.intensity},
                 {"grad", loss.grad},
                 {"ssim", loss.ssim},
                 {"total", loss.total}};
    j["sha256"] = sha256_hex(fused);
    out << j.dump() << "\n";
    return kExitOk;
}

struct PairFiles {
    std::string name;
    fs::path ir;
    fs::path vi;
    fs::path fused;
};

std::map<std::string, fs::path> images_by_stem(const fs::path& dir) {
    std::map<std::string, fs::path> out;
    if (!fs::is_directory(dir)) throw CommandError(kExitUsage, "not a directory: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_image_path(e.path())) out.emplace(e.path().stem().string(), e.path());
    }
    return out;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw CommandError(kExitData, "cannot write " + path);
    os << text;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

int cmd_rank(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    std::ifstream is(a.rank);
    if (!is) throw CommandError(kExitData, "cannot open " + a.rank);
    std::string line;
    std::vector<std::string> header;
    while (header.empty() && std::getline(is, line)) {
        if (!line.empty() && line[0] != '#') header = split_csv_line(line);
    }
    if (header.size() < 2) throw CommandError(kExitData, a.rank + ": missing header row");
    const std::vector<std::string> metrics(header.begin() + 1, header.end());
    std::vector<std::string> methods;
    std::vector<std::vector<double>> values;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line == "\r") continue;
        auto cells = split_csv_line(line);
        cells.resize(header.size());
        methods.push_back(cells[0]);
        std::vector<double> row;
        for (std::size_t k = 1; k < cells.size(); ++k) {
            try {
                std::size_t used = 0;
                const double v = cells[k].empty() ? std::nan("") : std::stod(cells[k], &used);
                if (!cells[k].empty() && used != cells[k].size()) throw std::invalid_argument(cells[k]);
                row.push_back(v);
            } catch (const std::exception&) {
                throw CommandError(kExitData, a.rank + ": bad number '" + cells[k] + "' for " + cells[0]);
            }
        }
        values.push_back(std::move(row));
    }
    if (methods.empty()) throw CommandError(kExitNoWork, a.rank + ": no method rows");
    TieRule tie;
    if (a.tie == "average") {
        tie = TieRule::Average;
    } else if (a.tie == "min") {
        tie = TieRule::Min;
    } else {
        throw CommandError(kExitUsage, "--tie must be 'average' or 'min'");
    }
    RankTable t;
    try {
        t = avg_rank(methods, metrics, values, std::vector<bool>(metrics.size(), true), tie);
    } catch (const std::invalid_argument& e) {
        throw CommandError(kExitNoWork, e.what());
    }
    for (const auto& w : t.warnings) err << "warning: " << w << "\n";

    std::ostringstream csv;
    csv << "method";
    for (const auto& m : metrics) csv << "," << m;
    csv << ",avg_rank\n";
    for (std::size_t m = 0; m < t.methods.size(); ++m) {
        csv << t.methods[m];
        for (double v : t.values[m]) csv << "," << std::defaultfloat << std::setprecision(10) << v;
        csv << "," << std::fixed << std::setprecision(2) << t.avg_rank[m] << "\n";
    }
    write_text(a.out, csv.str(), out);
    return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    if (!a.rank.empty()) return cmd_rank(a, out, err);
    if (a.pairs_dir.empty() || a.fused_dir.empty()) {
        throw CommandError(kExitUsage, "eval needs PAIRS_DIR and FUSED_DIR (or --rank TABLE)");
    }
    if (a.format != "csv" && a.format != "json") throw CommandError(kExitUsage, "--format must be csv or json");
    const auto sources = images_by_stem(a.pairs_dir);
    const auto fused = images_by_stem(a.fused_dir);

    std::vector<PairFiles> jobs;
    std::size_t warnings = 0;
    for (const auto& [stem, path] : sources) {
        const bool is_ir = stem.size() > 3 && stem.compare(stem.size() - 3, 3, "_ir") == 0;
        const bool is_vi = stem.size() > 3 && stem.compare(stem.size() - 3, 3, "_vi") == 0;
        const std::string name = stem.substr(0, stem.size() - 3);
        if (is_vi) {
            if (!sources.count(name + "_ir")) {
                err << "warning: " << path.string() << " has no matching _ir image\n";
                ++warnings;
            }
            continue;
        }
        if (!is_ir) {
            err << "warning: " << path.string() << " is neither <name>_ir nor <name>_vi\n";
            ++warnings;
            continue;
        }
        auto vi = sources.find(name + "_vi");
        auto fu = fused.find(name);
        if (vi == sources.end() || fu == fused.end()) {
            err << "warning: " << name << " is missing its " << (vi == sources.end() ? "_vi" : "fused")
                << " image, skipped\n";
            ++warnings;
            continue;
        }
        jobs.push_back({name, path, vi->second, fu->second});
    }

    std::vector<std::optional<MetricReport>> results(jobs.size());
    std::vector<std::string> failures(jobs.size());
    parallel_for(static_cast<std::int64_t>(jobs.size()), [&](std::int64_t i) {
        const auto& job = jobs[static_cast<std::size_t>(i)];
        try {
            const Tensor ir = luma(read_image(job.ir));
            const Tensor vi = luma(read_image(job.vi));
            const Tensor f = luma(read_image(job.fused));
            if (ir.shape() != vi.shape() || ir.shape() != f.shape()) {
                throw DimensionError("shapes differ: ir " + shape_text(ir) + ", vi " + shape_text(vi) + ", fused " +
                                     shape_text(f));
            }
            results[static_cast<std::size_t>(i)] = evaluate_pair(ir, vi, f, job.name);
        } catch (const std::exception& e) {
            failures[static_cast<std::size_t>(i)] = e.what();
        }
    });

    std::vector<MetricReport> rows;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (results[i]) {
            rows.push_back(*results[i]);
        } else {
            err << "warning: " << jobs[i].name << ": " << failures[i] << "\n";
            ++warnings;
        }
    }
    if (rows.empty()) {
        err << "error: no image triples could be evaluated\n";
        return kExitNoWork;
    }
    MetricReport mean;
    mean.name = "mean";
    std::vector<double> acc(kMetricNames.size(), 0.0);
    for (const auto& r : rows) {
        const auto v = metric_values(r);
        for (std::size_t k = 0; k < v.size(); ++k) acc[k] += v[k];
    }
    for (auto& v : acc) v /= static_cast<double>(rows.size());
    mean.en = acc[0];
    mean.sf = acc[1];
    mean.ag = acc[2];
    mean.vif = acc[3];
    mean.mi = acc[4];
    mean.qabf = acc[5];
    mean.scd = acc[6];

    std::ostringstream text;
    if (a.format == "csv") {
        text << "name";
        for (const auto& m : kMetricNames) text << "," << m;
        text << "\n";
        auto row = [&text](const MetricReport& r) {
            text << r.name;
            for (double v : metric_values(r)) text << "," << fmt(v);
            text << "\n";
        };
        for (const auto& r : rows) row(r);
        row(mean);
    } else {
        json j = json::array();
        auto obj = [](const MetricReport& r) {
            json o;
            o["name"] = r.name;
            const auto v = metric_values(r);
            for (std::size_t k = 0; k < v.size(); ++k) o[kMetricNames[k]] = v[k];
            return o;
        };
        for (const auto& r : rows) j.push_back(obj(r));
        j.push_back(obj(mean));
        text << j.dump(2) << "\n";
    }
    write_text(a.out, text.str(), out);
    if (!a.out.empty()) out << "evaluated " << rows.size() << " image(s), " << warnings << " warning(s)\n";
    else if (warnings > 0) err << warnings << " warning(s)\n";
    return kExitOk;
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    BenchOptions opt;
    try {
        opt.op = parse_bench_op(a.op);
    } catch (const std::invalid_argument& e) {
        throw CommandError(kExitUsage, e.what());
    }
    opt.sizes = a.sizes;
    if (opt.sizes.empty()) {
        switch (opt.op) {
            case BenchOp::Scan: opt.sizes = {65536, 131072}; break;
            case BenchOp::Dwt: opt.sizes = {256, 512}; break;
            case BenchOp::Forward: opt.sizes = {32, 64}; break;
        }
    }
    opt.repeats = a.repeats;
    opt.seed = a.seed;
    opt.channels = a.channels;
    opt.forward_cfg.channels = a.channels;
    opt.forward_cfg.num_vssm = 1;
    std::vector<BenchPoint> pts;
    try {
        pts = run_bench(opt);
    } catch (const std::invalid_argument& e) {
        throw CommandError(kExitUsage, e.what());
    }
    std::ostringstream csv;
    csv << "size,median_seconds\n";
    for (const auto& p : pts) csv << p.size << "," << std::setprecision(9) << p.median_seconds << "\n";
    write_text(a.out, csv.str(), out);
    if (pts.size() >= 2) out << "loglog_slope," << std::setprecision(4) << loglog_slope(pts) << "\n";
    return kExitOk;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
    WeightArchive a;
    try {
        a = load_weights(path);
    } catch (const ArchiveError& e) {
        throw CommandError(kExitData, std::string(e.what()) + " [" + to_string(e.code()) + "]");
    }
    for (const auto& [name, t] : a.entries()) {
        out << name << " " << to_string(t.shape()) << " " << t.size() << "\n";
    }
    out << "tensors: " << a.size() << "\n";
    out << "parameters: " << a.parameter_count() << "\n";
    out << "crc: ok\n";
    if (a.config_echo) out << "config: " << a.config_echo->describe() << "\n";
    return kExitOk;
}

int cmd_init(const InitArgs& a, std::ostream& out) {
    IsfmConfig cfg;
    cfg.channels = a.channels;
    cfg.num_vssm = a.num_vssm;
    const WeightArchive w = init_weights(cfg, a.seed);
    try {
        save_weights(w, a.out);
    } catch (const ArchiveError& e) {
        throw CommandError(kExitData, e.what());
    }
    out << "wrote " << a.out << ": " << w.size() << " tensors, " << w.parameter_count() << " parameters\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Infrared/visible image fusion, evaluation and benchmarking", "isfm"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 1;
    app.add_option("--threads", threads, "Worker threads")->envname("ISFM_THREADS")->check(CLI::PositiveNumber);

    FuseArgs fa;
    auto* fuse = app.add_subcommand("fuse", "Fuse an infrared/visible pair");
    fuse->add_option("ir", fa.ir, "Infrared image (PNG/PGM/PPM)")->required();
    fuse->add_option("vi", fa.vi, "Visible image (PNG/PGM/PPM)")->required();
    fuse->add_option("out", fa.out, "Output image")->required();
    auto* wopt = fuse->add_option("--weights", fa.weights, "ISFW weight file");
    auto* sopt = fuse->add_option("--seed", fa.seed, "Seed for initialized weights");
    wopt->excludes(sopt);
    fuse->add_option("--channels", fa.channels, "Feature channels for seeded weights")->excludes(wopt);
    fuse->add_option("--num-vssm", fa.num_vssm, "VSSM blocks per extractor for seeded weights")->excludes(wopt);
    fuse->add_flag("--no-mff", fa.no_mff, "Disable the frequency fusion path");
    fuse->add_flag("--no-fgg", fa.no_fgg, "Disable frequency-guided gating");
    fuse->add_flag("--no-fgm", fa.no_fgm, "Replace the guided fusion with addition");
    fuse->add_flag("--gray", fa.gray, "Write the fused luma only");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Compute fusion metrics or rank a metric table");
    eval->add_option("pairs_dir", ea.pairs_dir, "Directory with <name>_ir.* and <name>_vi.*");
    eval->add_option("fused_dir", ea.fused_dir, "Directory with fused <name>.*");
    eval->add_option("--out", ea.out, "Report path (default stdout)");
    eval->add_option("--format", ea.format, "csv or json");
    eval->add_option("--rank", ea.rank, "Methods x metrics CSV to rank");
    eval->add_option("--tie", ea.tie, "Tie rule for --rank: average or min");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Time scan, dwt or forward over sizes");
    bench->add_option("--op", ba.op, "scan, dwt or forward");
    bench->add_option("--sizes", ba.sizes, "Comma separated increasing sizes")->delimiter(',');
    bench->add_option("--repeats", ba.repeats, "Timed runs per size")->check(CLI::PositiveNumber);
    bench->add_option("--out", ba.out, "CSV path (default stdout)");
    bench->add_option("--channels", ba.channels, "Channels of the benchmark tensors")->check(CLI::PositiveNumber);
    bench->add_option("--seed", ba.seed, "Seed for random inputs");

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "List the tensors of a weight file");
    inspect->add_option("weights", inspect_path, "ISFW file")->required();

    InitArgs ia;
    auto* init = app.add_subcommand("init", "Write seeded weights to a file");
    init->add_option("out", ia.out, "Output ISFW file")->required();
    init->add_option("--seed", ia.seed, "Seed");
    init->add_option("--channels", ia.channels, "Feature channels");
    init->add_option("--num-vssm", ia.num_vssm, "VSSM blocks per extractor");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    const int previous = num_threads();
    set_num_threads(threads);
    int code = kExitOk;
    try {
        if (fuse->parsed()) {
            code = cmd_fuse(fa, out, err);
        } else if (eval->parsed()) {
            code = cmd_eval(ea, out, err);
        } else if (bench->parsed()) {
            code = cmd_bench(ba, out);
        } else if (inspect->parsed()) {
            code = cmd_inspect(inspect_path, out);
        } else if (init->parsed()) {
            code = cmd_init(ia, out);
        }
    } catch (const CommandError& e) {
        err << "error: " << e.what() << "\n";
        code = e.code;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        code = kExitUsage;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        code = kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        code = kExitData;
    }
    set_num_threads(previous);
    return code;
}

}  // namespace isfm::cli
