// pccodec: learned point-cloud codec for classification.
//
// A point cloud is encoded by a PointNet-style analysis transform into a
// small latent vector, entropy-coded into a bitstream, and decoded straight
// into class logits. Subcommands cover dataset ingestion, training,
// compression, rate-accuracy evaluation, BD metrics, critical points, and
// the auxiliary reconstruction network.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcc/pcc.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct cloud_input {
    std::string path;
    std::size_t index = 0;
    std::string split = "test";
    uint64_t seed = 0;
};

// Either an OFF mesh (sampled to the model's P) or one record of a packed
// dataset file.
pcc::point_cloud load_input_cloud(const cloud_input& in, std::size_t points) {
    if (in.path.size() >= 4 && in.path.substr(in.path.size() - 4) == ".off") {
        pcc::mesh m = pcc::load_off_file(in.path);
        pcc::rng r(in.seed);
        pcc::point_cloud c;
        c.pts = pcc::sample_surface(m, points, r);
        pcc::normalize_cloud(c.pts);
        return c;
    }
    pcc::dataset ds = pcc::load_dataset_file(in.path);
    const auto& records = in.split == "train" ? ds.train : ds.test;
    pcc::check_arg(in.index < records.size(),
                   "record index " + std::to_string(in.index) + " out of range (" +
                       std::to_string(records.size()) + " " + in.split + " records)");
    pcc::check_arg(ds.points_per_cloud == points,
                   "dataset P = " + std::to_string(ds.points_per_cloud) +
                       " does not match checkpoint P = " + std::to_string(points));
    return records[in.index];
}

void write_ra_csv(const std::string& path, const std::vector<pcc::ra_point>& points,
                  const std::string& config, std::size_t P) {
    std::ofstream f(path);
    pcc::check(f.good(), "cannot open for writing: " + path);
    f << "config,P,lambda,rate_bits,top1\n";
    for (const auto& p : points)
        f << config << "," << P << "," << p.lambda << "," << p.rate_bits << ","
          << p.accuracy << "\n";
    pcc::check(f.good(), "write failed: " + path);
}

std::vector<pcc::ra_point> read_ra_csv(const std::string& path) {
    std::ifstream f(path);
    pcc::check(f.good(), "cannot open: " + path);
    std::vector<pcc::ra_point> out;
    std::string line;
    bool header = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::stringstream ss(line);
        std::string tok;
        pcc::ra_point p;
        std::getline(ss, tok, ',');  // config
        p.checkpoint_id = tok;
        std::getline(ss, tok, ',');  // P
        std::getline(ss, tok, ',');
        p.lambda = std::stod(tok);
        std::getline(ss, tok, ',');
        p.rate_bits = std::stod(tok);
        std::getline(ss, tok, ',');
        p.accuracy = std::stod(tok);
        out.push_back(p);
    }
    return out;
}

std::vector<double> parse_lambda_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    pcc::check_arg(!out.empty(), "empty lambda list");
    return out;
}

void write_xyz(const std::string& path, const std::vector<pcc::point3>& pts) {
    std::ofstream f(path);
    pcc::check(f.good(), "cannot open for writing: " + path);
    for (const auto& p : pts) f << p[0] << " " << p[1] << " " << p[2] << "\n";
    pcc::check(f.good(), "write failed: " + path);
}

int run(int argc, char** argv) {
    CLI::App app{"task-specialized point cloud codec for classification"};
    app.require_subcommand(1);
    // optional config file; command-line flags win
    app.set_config("--config-file")->configurable(false);

    // ---- synth ----
    auto* synth = app.add_subcommand(
        "synth", "generate the procedural 40-class OFF corpus");
    std::string synth_out = "synthetic";
    std::size_t synth_train = 40, synth_test = 10;
    uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--train", synth_train, "models per class, train split");
    synth->add_option("--test", synth_test, "models per class, test split");
    synth->add_option("--seed", synth_seed, "rng seed");

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "sample an OFF tree into a dataset");
    std::string ingest_dir, ingest_out = "dataset.bin";
    pcc::ingest_options ingest_opt;
    ingest->add_option("--modelnet-dir", ingest_dir, "root of <class>/<split>/*.off")
        ->required();
    ingest->add_option("--points", ingest_opt.points, "points per cloud (P)");
    ingest->add_option("--seed", ingest_opt.seed, "rng seed");
    ingest->add_option("--grid-scale", ingest_opt.grid_scale,
                       "input scaling S for grid quantization (0 = off)");
    ingest->add_option("--jitter", ingest_opt.jitter, "gaussian jitter sigma");
    ingest->add_option("--out", ingest_out, "output dataset file")->required();

    // ---- train ----
    auto* train = app.add_subcommand("train", "train one rate point");
    pcc::train_spec tspec;
    std::string train_dataset, train_out = "ckpt.bin", train_log;
    train->add_option("--config", tspec.config_name, "full | lite | micro")
        ->required();
    train->add_option("--points", tspec.points, "P");
    train->add_option("--lambda", tspec.lambda, "rate-distortion weight")->required();
    train->add_option("--dataset", train_dataset, "packed dataset file")->required();
    train->add_option("--out", train_out, "checkpoint path")->required();
    train->add_option("--epochs", tspec.epochs, "max epochs");
    train->add_option("--batch", tspec.batch_size, "batch size");
    train->add_option("--seed", tspec.seed, "rng seed");
    train->add_option("--lr", tspec.lr, "Adam learning rate");
    train->add_option("--patience", tspec.patience, "early-stop patience");
    train->add_option("--log", train_log, "JSON-lines step log path");

    // ---- compress / decompress ----
    auto* compress = app.add_subcommand("compress", "encode one cloud");
    cloud_input comp_in;
    std::string comp_ckpt, comp_out = "stream.bin";
    compress->add_option("--ckpt", comp_ckpt, "checkpoint")->required();
    compress->add_option("--in", comp_in.path, ".off mesh or dataset file")
        ->required();
    compress->add_option("--index", comp_in.index, "dataset record index");
    compress->add_option("--split", comp_in.split, "dataset split (train|test)");
    compress->add_option("--seed", comp_in.seed, "sampling seed for .off input");
    compress->add_option("--out", comp_out, "bitstream path")->required();

    auto* decompress = app.add_subcommand("decompress", "decode a bitstream to logits");
    std::string dec_ckpt, dec_in;
    decompress->add_option("--ckpt", dec_ckpt, "checkpoint")->required();
    decompress->add_option("--in", dec_in, "bitstream path")->required();

    // ---- evaluate ----
    auto* evaluate = app.add_subcommand("evaluate", "rate-accuracy on a test set");
    std::string eval_ckpt, eval_dataset, eval_out = "ra.csv";
    evaluate->add_option("--ckpt", eval_ckpt, "checkpoint")->required();
    evaluate->add_option("--dataset", eval_dataset, "packed dataset file")->required();
    evaluate->add_option("--out", eval_out, "output CSV")->required();

    // ---- sweep ----
    auto* sweep = app.add_subcommand("sweep", "train a lambda family and emit curves");
    pcc::train_spec sspec;
    std::string sweep_dataset, sweep_out = "sweep", sweep_lambdas =
        "10,30,100,300,1000,3000,8000,16000";
    sweep->add_option("--config", sspec.config_name, "full | lite | micro")
        ->required();
    sweep->add_option("--points", sspec.points, "P");
    sweep->add_option("--lambdas", sweep_lambdas, "comma-separated lambda list");
    sweep->add_option("--dataset", sweep_dataset, "packed dataset file")->required();
    sweep->add_option("--out", sweep_out, "output directory")->required();
    sweep->add_option("--epochs", sspec.epochs, "max epochs per rate point");
    sweep->add_option("--batch", sspec.batch_size, "batch size");
    sweep->add_option("--seed", sspec.seed, "rng seed");

    // ---- bd ----
    auto* bd = app.add_subcommand("bd", "Bjontegaard-Delta report for two RA curves");
    std::string bd_test, bd_anchor, bd_out;
    bd->add_option("--test", bd_test, "test curve CSV")->required();
    bd->add_option("--anchor", bd_anchor, "anchor curve CSV")->required();
    bd->add_option("--out", bd_out, "write JSON report here (default stdout)");

    // ---- critical-points ----
    auto* crit = app.add_subcommand("critical-points",
                                    "minimal point subset with the same latent");
    cloud_input crit_in;
    std::string crit_ckpt;
    crit->add_option("--ckpt", crit_ckpt, "checkpoint")->required();
    crit->add_option("--in", crit_in.path, ".off mesh or dataset file")->required();
    crit->add_option("--index", crit_in.index, "dataset record index");
    crit->add_option("--split", crit_in.split, "dataset split (train|test)");
    crit->add_option("--seed", crit_in.seed, "sampling seed for .off input");

    // ---- recon-train / recon-run ----
    auto* rtrain = app.add_subcommand("recon-train",
                                      "train the reconstruction network");
    std::string rt_ckpt, rt_dataset, rt_out = "recon.bin";
    pcc::recon_train_spec rt_spec;
    rtrain->add_option("--ckpt", rt_ckpt, "frozen codec checkpoint")->required();
    rtrain->add_option("--dataset", rt_dataset, "packed dataset file")->required();
    rtrain->add_option("--out", rt_out, "reconstruction net path")->required();
    rtrain->add_option("--epochs", rt_spec.epochs, "epochs");
    rtrain->add_option("--lr", rt_spec.lr, "Adam learning rate");
    rtrain->add_option("--seed", rt_spec.seed, "rng seed");

    auto* rrun = app.add_subcommand("recon-run", "reconstruct points from a bitstream");
    std::string rr_ckpt, rr_recon, rr_in, rr_out = "recon.xyz", rr_ref;
    uint64_t rr_seed = 0;
    rrun->add_option("--ckpt", rr_ckpt, "checkpoint")->required();
    rrun->add_option("--recon", rr_recon, "reconstruction net")->required();
    rrun->add_option("--in", rr_in, "bitstream or .off input")->required();
    rrun->add_option("--out", rr_out, "xyz output path")->required();
    rrun->add_option("--ref", rr_ref, "reference .off for a chamfer report");
    rrun->add_option("--seed", rr_seed, "sampling seed for .off input");

    // ---- macs ----
    auto* macs = app.add_subcommand("macs", "MAC counts for a configuration");
    std::string macs_config;
    std::size_t macs_points = 0;
    macs->add_option("--config", macs_config, "full | lite | micro")->required();
    macs->add_option("--points", macs_points, "P for the total-encoder column");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        pcc::write_synthetic_tree(synth_out, synth_train, synth_test, synth_seed);
        std::cout << "wrote " << pcc::synthetic_class_names().size() << " classes x ("
                  << synth_train << " train + " << synth_test << " test) to "
                  << synth_out << "\n";
        return 0;
    }

    if (ingest->parsed()) {
        const pcc::dataset ds = pcc::ingest_tree(ingest_dir, ingest_opt);
        pcc::save_dataset_file(ingest_out, ds);
        std::cout << "ingested " << ds.train.size() << " train + " << ds.test.size()
                  << " test clouds, " << ds.class_names.size() << " classes, P = "
                  << ds.points_per_cloud << " -> " << ingest_out << "\n";
        return 0;
    }

    if (train->parsed()) {
        const pcc::dataset ds = pcc::load_dataset_file(train_dataset);
        std::ofstream log;
        if (!train_log.empty()) {
            log.open(train_log);
            pcc::check(log.good(), "cannot open for writing: " + train_log);
        }
        auto on_step = [&](const pcc::step_entry& e) {
            if (!log.is_open()) return;
            json j{{"step", e.step},         {"epoch", e.epoch},
                   {"loss", e.loss},         {"rate_bits", e.rate_bits},
                   {"ce_nats", e.ce_nats},   {"accuracy", e.accuracy}};
            log << j.dump() << "\n";
        };
        const pcc::train_result res = pcc::train_codec<float>(tspec, ds, on_step);
        pcc::write_file(train_out, res.best_checkpoint);
        if (res.diverged) {
            std::cerr << "error: training diverged (" << res.divergence_message
                      << "); last good checkpoint preserved at " << train_out << "\n";
            return 1;
        }
        const auto& last = res.log.back();
        std::cout << "trained " << tspec.config_name << " P=" << tspec.points
                  << " lambda=" << tspec.lambda << ": best epoch " << res.best_epoch
                  << ", val loss " << res.best_val_loss << ", val acc "
                  << last.val_accuracy << "% -> " << train_out << "\n";
        return 0;
    }

    if (compress->parsed()) {
        auto ck = pcc::load_checkpoint_file<float>(comp_ckpt);
        const pcc::point_cloud cloud = load_input_cloud(comp_in, ck.model.cfg.points);
        const auto stream = pcc::compress_cloud(
            ck.model, ck.tables, pcc::cloud_tensor<float>(cloud.pts));
        pcc::write_file(comp_out, stream);
        std::cout << "compressed to " << pcc::payload_bits(stream) << " payload bits ("
                  << stream.size() << " bytes with header) -> " << comp_out << "\n";
        return 0;
    }

    if (decompress->parsed()) {
        auto ck = pcc::load_checkpoint_file<float>(dec_ckpt);
        const auto bytes = pcc::read_file(dec_in);
        const auto res = pcc::decompress_cloud(ck.model, ck.tables, bytes);
        const std::size_t top1 = pcc::argmax_class(res.logits);
        json j;
        j["top1"] = top1;
        j["logits"] = std::vector<float>(res.logits.data.begin(),
                                         res.logits.data.end());
        std::cout << j.dump() << "\n";
        return 0;
    }

    if (evaluate->parsed()) {
        auto ck = pcc::load_checkpoint_file<float>(eval_ckpt);
        const pcc::dataset ds = pcc::load_dataset_file(eval_dataset);
        pcc::check_arg(ds.points_per_cloud == ck.model.cfg.points,
                       "dataset P does not match checkpoint P");
        auto res = pcc::evaluate_codec(ck.model, ck.tables, ds.test, ck.lambda);
        write_ra_csv(eval_out, {res.point}, ck.model.cfg.name, ck.model.cfg.points);
        std::cout << "rate " << res.point.rate_bits << " bits/cloud, top-1 "
                  << res.point.accuracy << "% over " << res.clouds << " clouds -> "
                  << eval_out << "\n";
        return 0;
    }

    if (sweep->parsed()) {
        const pcc::dataset ds = pcc::load_dataset_file(sweep_dataset);
        const std::vector<double> lambdas = parse_lambda_list(sweep_lambdas);
        fs::create_directories(sweep_out);
        std::vector<pcc::ra_point> points;
        for (double lambda : lambdas) {
            pcc::train_spec s = sspec;
            s.lambda = lambda;
            const pcc::train_result res = pcc::train_codec<float>(s, ds);
            char name[64];
            std::snprintf(name, sizeof(name), "ckpt_lambda%g.bin", lambda);
            const std::string ckpt_path = (fs::path(sweep_out) / name).string();
            pcc::write_file(ckpt_path, res.best_checkpoint);
            if (res.diverged) {
                std::cerr << "error: lambda " << lambda << " diverged ("
                          << res.divergence_message << ")\n";
                return 1;
            }
            auto ck = pcc::load_checkpoint<float>(res.best_checkpoint);
            auto ev = pcc::evaluate_codec(ck.model, ck.tables, ds.test, lambda);
            ev.point.checkpoint_id = ckpt_path;
            points.push_back(ev.point);
            std::cout << "lambda " << lambda << ": rate " << ev.point.rate_bits
                      << " bits, top-1 " << ev.point.accuracy << "%\n";
        }
        write_ra_csv((fs::path(sweep_out) / "ra.csv").string(), points,
                     sspec.config_name, sspec.points);
        write_ra_csv((fs::path(sweep_out) / "pareto.csv").string(),
                     pcc::pareto_front(points), sspec.config_name, sspec.points);
        return 0;
    }

    if (bd->parsed()) {
        const auto test_curve = read_ra_csv(bd_test);
        const auto anchor_curve = read_ra_csv(bd_anchor);
        const pcc::bd_report rep = pcc::bd_metrics(test_curve, anchor_curve);
        json j{{"bd_rate", rep.bd_rate_percent}, {"bd_acc", rep.bd_accuracy}};
        if (bd_out.empty()) {
            std::cout << j.dump() << "\n";
        } else {
            std::ofstream f(bd_out);
            pcc::check(f.good(), "cannot open for writing: " + bd_out);
            f << j.dump() << "\n";
        }
        return 0;
    }

    if (crit->parsed()) {
        auto ck = pcc::load_checkpoint_file<float>(crit_ckpt);
        const pcc::point_cloud cloud = load_input_cloud(crit_in, ck.model.cfg.points);
        const auto cs = ck.model.critical_points(pcc::cloud_tensor<float>(cloud.pts));
        json j;
        j["indices"] = cs.indices;
        j["per_channel_argmax"] = cs.channel_argmax;
        j["count"] = cs.indices.size();
        std::cout << j.dump() << "\n";
        return 0;
    }

    if (rtrain->parsed()) {
        auto ck = pcc::load_checkpoint_file<float>(rt_ckpt);
        const pcc::dataset ds = pcc::load_dataset_file(rt_dataset);
        pcc::check_arg(ds.points_per_cloud == ck.model.cfg.points,
                       "dataset P does not match checkpoint P");
        auto net = pcc::recon_net<float>::create(ck.model.cfg.latent,
                                                 ds.points_per_cloud, rt_spec.seed);
        const auto log = pcc::train_recon(net, ck.model, ds.train, rt_spec);
        pcc::write_file(rt_out, pcc::save_recon(net));
        std::cout << "recon chamfer: epoch 0 " << log.front().chamfer_mean
                  << " -> epoch " << log.back().epoch << " " << log.back().chamfer_mean
                  << " -> " << rt_out << "\n";
        return 0;
    }

    if (rrun->parsed()) {
        auto ck = pcc::load_checkpoint_file<float>(rr_ckpt);
        auto net = pcc::load_recon<float>(pcc::read_file(rr_recon));
        pcc::check_arg(net.latent == ck.model.cfg.latent,
                       "reconstruction net does not match checkpoint latent size");
        std::vector<int32_t> latent;
        if (rr_in.size() >= 4 && rr_in.substr(rr_in.size() - 4) == ".off") {
            cloud_input ci;
            ci.path = rr_in;
            ci.seed = rr_seed;
            const pcc::point_cloud cloud = load_input_cloud(ci, ck.model.cfg.points);
            const auto y =
                ck.model.analyze_one(pcc::cloud_tensor<float>(cloud.pts));
            latent = pcc::quantize_latent(y);
        } else {
            const auto bytes = pcc::read_file(rr_in);
            latent = pcc::decompress_cloud(ck.model, ck.tables, bytes).latent;
        }
        pcc::tensor<float> yhat({net.latent, 1});
        for (std::size_t i = 0; i < latent.size(); ++i)
            yhat[i] = static_cast<float>(latent[i]);
        const auto pred = net.forward_one(yhat);
        const auto pts = pcc::tensor_cloud(pred);
        write_xyz(rr_out, pts);
        std::cout << "wrote " << pts.size() << " points -> " << rr_out << "\n";
        if (!rr_ref.empty()) {
            cloud_input ci;
            ci.path = rr_ref;
            ci.seed = rr_seed;
            const pcc::point_cloud ref = load_input_cloud(ci, ck.model.cfg.points);
            std::cout << "chamfer vs reference: " << pcc::chamfer(pts, ref.pts)
                      << "\n";
        }
        return 0;
    }

    if (macs->parsed()) {
        const auto cfg = pcc::make_codec_config(
            macs_config, macs_points ? macs_points : 1024);
        const auto r = pcc::mac_count(cfg);
        json j;
        j["config"] = cfg.name;
        j["encoder_mac_per_point"] = r.encoder_per_point;
        j["decoder_mac"] = r.decoder_total;
        j["encoder_mac_per_point_2sf"] =
            pcc::round_sig_figs(static_cast<double>(r.encoder_per_point), 2);
        j["decoder_mac_2sf"] =
            pcc::round_sig_figs(static_cast<double>(r.decoder_total), 2);
        if (macs_points) {
            j["points"] = macs_points;
            j["encoder_mac_total"] = r.encoder_per_point * macs_points;
        }
        std::cout << j.dump() << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
