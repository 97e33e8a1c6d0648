#include <adawave/adawave.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace adawave;

namespace {

std::vector<BenchCell> manifest(const std::string& text) {
    std::istringstream in(text);
    return parse_manifest(in);
}

RunResult result(std::string model, std::string setting, double mse, double mae, std::uint64_t seed) {
    return {"forecast", "synthetic:simple", std::move(model), std::move(setting), mse, mae, 1.0, 0xabcULL, seed};
}

} // namespace

TEST(Metrics, ConstantErrorOfTwo) {
    Tensor p = Tensor::full({2, 3, 4}, 5.0), t = Tensor::full({2, 3, 4}, 3.0);
    Metrics m = metrics(p, t);
    EXPECT_DOUBLE_EQ(m.mse, 4.0);
    EXPECT_DOUBLE_EQ(m.mae, 2.0);
    EXPECT_EQ(m.count, 24.0);
}

TEST(Metrics, MaskedMatchesIndexingOracle) {
    Rng rng = make_rng(1);
    Tensor p = normal({3, 10}, 0, 1, rng), t = normal({3, 10}, 0, 1, rng);
    Tensor m = make_mask({MaskMode::random, 0.3, 0, 2}, 3, 10);
    Tensor sel = imputation_loss_mask(m);
    double sq = 0, ab = 0, n = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (sel[i] == 1.0) {
            sq += (p[i] - t[i]) * (p[i] - t[i]);
            ab += std::abs(p[i] - t[i]);
            ++n;
        }
    Metrics got = metrics(p, t, sel);
    EXPECT_NEAR(got.mse, sq / n, 1e-14);
    EXPECT_NEAR(got.mae, ab / n, 1e-14);
    EXPECT_EQ(got.count, 9.0);
    EXPECT_THROW(metrics(p, Tensor::zeros({3, 9})), ShapeError);
}

TEST(Metrics, AccumulatorEqualsSinglePass) {
    Rng rng = make_rng(3);
    Tensor p = normal({4, 8}, 0, 1, rng), t = normal({4, 8}, 0, 1, rng);
    MetricAccumulator acc;
    auto row = [](const Tensor& x, std::size_t r) {
        return Tensor({8}, std::vector<double>(x.values().begin() + r * 8, x.values().begin() + (r + 1) * 8));
    };
    for (std::size_t r = 0; r < 4; ++r) acc.add(row(p, r), row(t, r));
    EXPECT_NEAR(acc.result().mse, metrics(p, t).mse, 1e-14);
    EXPECT_LE(acc.result().mae, std::sqrt(acc.result().mse));
}

TEST(Manifest, ParsesCellsAndComments) {
    auto cells = manifest("# comment\n\n"
                          "task=impute dataset=data/x.csv settings=0.125,0.25 seeds=0,1 model=linear lr=0.01\n"
                          "dataset=synthetic:simple settings=96\n");
    ASSERT_EQ(cells.size(), 2u);
    EXPECT_EQ(cells[0].task, Task::impute);
    EXPECT_EQ(cells[0].settings, (std::vector<std::string>{"0.125", "0.25"}));
    EXPECT_EQ(cells[0].seeds, (std::vector<std::uint64_t>{0, 1}));
    EXPECT_EQ(cells[0].model, "linear");
    EXPECT_EQ(cells[0].overrides.at("lr"), "0.01");
    EXPECT_EQ(cells[1].model, "adawavenet");
    EXPECT_EQ(cells[1].seeds, (std::vector<std::uint64_t>{0}));
    EXPECT_TRUE(manifest("").empty());
    EXPECT_THROW(manifest("dataset=x settings=1 model=lstm"), DataError);
    EXPECT_THROW(manifest("settings=1"), DataError);
    EXPECT_THROW(manifest("dataset=x oops"), DataError);
}

TEST(Manifest, CellConfigAppliesSettingAndTaskDefaults) {
    auto cells = manifest("task=impute dataset=synthetic:simple settings=0.375 epochs=2\n"
                          "task=superres dataset=synthetic:traffic settings=4\n"
                          "dataset=synthetic:simple settings=48\n");
    RunConfig a = cell_config(cells[0], "0.375", 3);
    EXPECT_EQ(a.task.mask.ratio, 0.375);
    EXPECT_FALSE(a.model.revin);
    EXPECT_EQ(a.train.max_epochs, 2u);
    EXPECT_EQ(a.model.seed, 3u);
    EXPECT_EQ(a.task.mask.seed, 3u);
    RunConfig b = cell_config(cells[1], "4", 0);
    EXPECT_EQ(b.model.sr_ratio, 4u);
    EXPECT_EQ(b.task.sr_ratio, 4u);
    EXPECT_EQ(b.synth.family, SynthFamily::traffic);
    RunConfig c = cell_config(cells[2], "48", 1);
    EXPECT_EQ(c.model.input_len, 48u);
    EXPECT_EQ(c.task.pred_len, 48u);
    EXPECT_TRUE(c.model.revin);
    EXPECT_NE(c.hash(), cell_config(cells[2], "48", 2).hash());
    EXPECT_EQ(c.hash(), cell_config(cells[2], "48", 1).hash());
}

TEST(RunConfig, KeyValueRoundTrip) {
    RunConfig c = synthetic_run_config(SynthFamily::electricity, 4);
    c.task.mask.mode = MaskMode::extended;
    c.train.max_batches_per_epoch = 7;
    RunConfig d = RunConfig::from_key_values(c.to_key_values());
    EXPECT_EQ(format_key_values(c.to_key_values()), format_key_values(d.to_key_values()));
    EXPECT_EQ(c.hash(), d.hash());
}

TEST(Bench, EmptyManifestGivesEmptyTable) {
    BenchReport r = run_benchmark({});
    EXPECT_TRUE(r.results.empty());
    std::ostringstream md;
    write_markdown_report(md, r.results);
    EXPECT_EQ(md.str(), "# Benchmark results\n");
}

TEST(Bench, SingleSyntheticCellGivesOneRow) {
    auto cells = manifest("dataset=synthetic:simple settings=96 seeds=0 epochs=1 max_batches=2 d_model=16 heads=2\n");
    BenchReport r = run_benchmark(cells);
    ASSERT_EQ(r.results.size(), 1u);
    EXPECT_FALSE(r.partial);
    const RunResult& row = r.results[0];
    EXPECT_EQ(row.task, "forecast");
    EXPECT_EQ(row.setting, "96");
    EXPECT_TRUE(std::isfinite(row.mse));
    EXPECT_LE(row.mae, std::sqrt(row.mse));
}

TEST(Bench, BaselineModelsRun) {
    auto cells = manifest("dataset=synthetic:simple settings=96 seeds=0 model=persistence\n"
                          "dataset=synthetic:simple settings=96 seeds=0 model=linear epochs=1\n");
    BenchReport r = run_benchmark(cells);
    ASSERT_EQ(r.results.size(), 2u);
    EXPECT_EQ(r.results[0].model, "persistence");
    EXPECT_GT(r.results[0].mse, 0.0);
}

TEST(Bench, MissingDatasetIsSkippedWithNotice) {
    auto cells = manifest("dataset=no/such/file.csv settings=96\n"
                          "dataset=synthetic:simple settings=96 model=persistence\n");
    BenchReport r = run_benchmark(cells, {}, "/nonexistent");
    EXPECT_TRUE(r.partial);
    ASSERT_EQ(r.notices.size(), 1u);
    EXPECT_NE(r.notices[0].find("no/such/file.csv"), std::string::npos);
    EXPECT_EQ(r.results.size(), 1u);
    std::ostringstream md;
    write_markdown_report(md, r.results, r.notices);
    EXPECT_NE(md.str().find("## Notices"), std::string::npos);
}

TEST(Bench, CsvDatasetRunsRelativeToBaseDir) {
    auto dir = std::filesystem::temp_directory_path() / "adawave_bench_test";
    std::filesystem::create_directories(dir);
    Rng rng = make_rng(5);
    write_csv((dir / "d.csv").string(), {"a", "b"}, normal({2, 120}, 0, 1, rng));
    auto cells = manifest("dataset=d.csv settings=8 model=linear epochs=1 split=0.6,0.2,0.2\n");
    BenchReport r = run_benchmark(cells, {}, dir);
    EXPECT_FALSE(r.partial);
    ASSERT_EQ(r.results.size(), 1u);
    std::filesystem::remove_all(dir);
}

TEST(Summary, MeanAndSampleStd) {
    std::vector<RunResult> rs{result("a", "96", 1.0, 0.5, 0), result("a", "96", 2.0, 1.0, 1),
                              result("a", "96", 4.0, 1.5, 2), result("b", "96", 3.0, 1.0, 0)};
    auto s = summarize(rs);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].runs, 3u);
    EXPECT_DOUBLE_EQ(s[0].mse_mean, 7.0 / 3.0);
    double var = ((1 - 7.0 / 3) * (1 - 7.0 / 3) + (2 - 7.0 / 3) * (2 - 7.0 / 3) + (4 - 7.0 / 3) * (4 - 7.0 / 3)) / 2.0;
    EXPECT_NEAR(s[0].mse_std, std::sqrt(var), 1e-14);
    EXPECT_NEAR(s[0].mae_std, 0.5, 1e-14);
    EXPECT_EQ(s[1].runs, 1u);
    EXPECT_EQ(s[1].mse_std, 0.0);
}

TEST(Summary, MaeNeverExceedsRootMse) {
    Rng rng = make_rng(6);
    for (int i = 0; i < 20; ++i) {
        Tensor p = normal({5, 7}, 0, 1, rng), t = normal({5, 7}, 0, 2, rng);
        Metrics m = metrics(p, t);
        RunResult r = result("x", "1", m.mse, m.mae, 0);
        EXPECT_NO_THROW(check_result(r));
        EXPECT_LE(m.mae, std::sqrt(m.mse));
    }
    EXPECT_THROW(check_result(result("x", "1", 1.0, 2.0, 0)), NumericalError);
    EXPECT_THROW(check_result(result("x", "1", std::nan(""), 0.0, 0)), NumericalError);
}

TEST(Results, CsvRoundTripAndDeterministicReport) {
    std::vector<RunResult> rs{result("adawavenet", "96", 0.123456789012345678, 0.3, 0),
                              result("linear", "96", 1.0 / 3.0, 0.5, 1)};
    rs[1].config_hash = 0xfedcba9876543210ULL;
    std::stringstream csv;
    write_results_csv(csv, rs);
    auto back = read_results_csv(csv);
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(back[i].mse, rs[i].mse);
        EXPECT_EQ(back[i].mae, rs[i].mae);
        EXPECT_EQ(back[i].config_hash, rs[i].config_hash);
        EXPECT_EQ(back[i].model, rs[i].model);
        EXPECT_EQ(back[i].seed, rs[i].seed);
    }
    std::ostringstream a, b;
    write_markdown_report(a, rs);
    write_markdown_report(b, back);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_NE(a.str().find("| adawavenet MSE |"), std::string::npos);
    std::istringstream bad("h\n1,2,3\n");
    EXPECT_THROW(read_results_csv(bad), DataError);
}

TEST(Config, KeyValueParsing) {
    KeyValues kv = parse_key_values("# c\n a = 1 \nb=x=y\n\n");
    EXPECT_EQ(kv.at("a"), "1");
    EXPECT_EQ(kv.at("b"), "x=y");
    EXPECT_THROW(parse_double("1.5x", "v"), DataError);
    EXPECT_THROW(parse_u64("-1", "v"), DataError);
    EXPECT_TRUE(parse_bool("true", "v"));
    EXPECT_FALSE(parse_bool("0", "v"));
    EXPECT_EQ(parse_double(format_double(0.1 + 0.2), "v"), 0.1 + 0.2);
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
}

TEST(Plot, SvgAndMaskShades) {
    Chart c("demo <1>");
    c.series.push_back({"y", iota_axis(4), {0, 1, 0, 1}});
    c.shades = mask_shades({1, 0, 0, 1, 0});
    ASSERT_EQ(c.shades.size(), 2u);
    EXPECT_EQ(c.shades[0].x0, 0.5);
    EXPECT_EQ(c.shades[0].x1, 2.5);
    EXPECT_EQ(c.shades[1].x0, 3.5);
    EXPECT_EQ(c.shades[1].x1, 4.5);
    std::string svg = render_svg(c);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_NE(svg.find("demo &lt;1&gt;"), std::string::npos);
    EXPECT_EQ(svg.find("nan"), std::string::npos);
}
