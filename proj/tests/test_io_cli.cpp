#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <unistd.h>

#include "aoi/io.hpp"
#include "cli.hpp"

using namespace aoi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("aoi_test_" + tag + "_" + std::to_string(::getpid())))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli_run(std::vector<std::string> args)
{
    args.insert(args.begin(), "aoi");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("policy json round trip")
{
    ModelParams params;
    params.delta = 7;
    params.p = 0.3;
    const auto solved = rvi_solve(params, 0.9);
    const auto doc = io::policy_to_json(solved.policy, params, &solved.values);
    CHECK(doc.at("version") == 1);
    CHECK(doc.at("states").size() == StateSpace(7).size());
    const auto back = io::policy_from_json(io::json::parse(doc.dump()));
    CHECK(back.params == params);
    CHECK(back.policy == solved.policy);
    CHECK(back.values == solved.values.values);

    const auto bare = io::policy_from_json(io::policy_to_json(solved.policy, params));
    CHECK(bare.values.empty());
}

TEST_CASE("malformed policy documents")
{
    ModelParams params;
    params.delta = 4;
    const auto good = io::policy_to_json(baseline_policy(params), params);

    auto doc = good;
    doc["version"] = 2;
    CHECK_THROWS_AS(io::policy_from_json(doc), ParameterError);

    doc = good;
    doc["states"].erase(doc["states"].begin());
    CHECK_THROWS_AS(io::policy_from_json(doc), ParameterError);

    doc = good;
    doc["states"].push_back(doc["states"][0]);
    CHECK_THROWS_AS(io::policy_from_json(doc), ParameterError);

    doc = good;
    doc.erase("params");
    CHECK_THROWS_AS(io::policy_from_json(doc), ParameterError);

    doc = good;
    doc["states"][0][4] = "teleport";
    CHECK_THROWS_AS(io::policy_from_json(doc), ParameterError);

    doc = good;
    for (auto& row : doc["states"])
        if (row[3] == 1) row[4] = "update";
    CHECK_THROWS_AS(io::policy_from_json(doc), ContractError);

    doc = good;
    doc["states"][0][0] = "one";
    CHECK_THROWS_AS(io::policy_from_json(doc), ParameterError);
}

TEST_CASE("mixture json round trip")
{
    ModelParams params;
    params.delta = 5;
    auto lo = baseline_policy(params);
    auto hi = lo;
    hi.lambda = 2.0;
    const MixturePolicy m{lo, hi, 0.375};
    const auto back = io::mixture_from_json(io::mixture_to_json(m, params));
    CHECK(back.mixture.alpha == 0.375);
    CHECK(back.mixture.high.lambda == 2.0);
    CHECK(back.params == params);
}

TEST_CASE("csv documents carry a stamp and a header")
{
    ModelParams params;
    params.delta = 5;
    const auto solved = rvi_solve(params, 0.9);
    const auto stamp = io::stamp(params, "lambda=0.9");
    CHECK(stamp.rfind("# ", 0) == 0);
    CHECK(stamp.find("delta=5") != std::string::npos);

    auto check_head = [&](const std::string& csv, const std::string& header, std::size_t rows) {
        const auto lines = lines_of(csv);
        REQUIRE(lines.size() == rows + 2);
        CHECK(lines[0] + "\n" == stamp);
        CHECK(lines[1] == header);
    };
    check_head(io::values_csv(solved.values, stamp), "a_p,a_s,lam_p,lam_s,value", StateSpace(5).size());
    // Type3 rows carry no decision and are left out of the grid
    check_head(io::grid_csv(solved.policy, stamp), "a_p,a_s,state_type,action", 2 * 5 * 5);
    check_head(io::thresholds_csv(extract_thresholds(solved.policy), stamp), "state_type,a_p,threshold", 6);
    const auto grid = lines_of(io::grid_csv(solved.policy, stamp));
    CHECK(grid[2].find("type1") != std::string::npos);
}

TEST_CASE("cli usage errors")
{
    CHECK(cli_run({}).code == 2);
    CHECK(cli_run({"bogus"}).code == 2);
    CHECK(cli_run({"solve", "--solver", "magic", "--out", "/tmp"}).code == 2);
    CHECK(cli_run({"solve", "--delta", "abc"}).code == 2);
    TempDir dir("usage");
    const auto empty = cli_run({"sweep", "--out", dir.path.string()});
    CHECK(empty.code == 2);
    CHECK(empty.err.find("grid") != std::string::npos);
    CHECK(cli_run({"sweep", "--p-grid", " , ", "--out", dir.path.string()}).code == 2);
    CHECK(cli_run({"solve", "--delta", "2", "--out", dir.path.string()}).code == 1);
    CHECK(cli_run({"solve", "--lambda", "-1", "--out", dir.path.string()}).code == 1);
    CHECK(cli_run({"--help"}).code == 0);
}

TEST_CASE("cli solve writes its artifacts")
{
    TempDir dir("solve");
    const auto r = cli_run({"solve", "--k", "0", "--lambda", "0", "--delta", "8", "--out", dir.path.string()});
    REQUIRE(r.code == 0);
    for (const char* f : {"policy.json", "thresholds.csv", "values.csv", "grid.csv"})
        CHECK(fs::exists(dir / f));
    const auto loaded = io::policy_from_json(io::read_json(dir / "policy.json"));
    CHECK(loaded.params.delta == 8);
    for (const auto& s : enumerate_states(loaded.params))
        if (classify(s) == StateType::Type1) CHECK(loaded.policy.at(s) == Action::Update);
}

TEST_CASE("cli config file and flag precedence")
{
    TempDir dir("config");
    io::write_file(dir / "run.cfg", "# run\np = 0.3\ndelta = 6\nlambda = 0.5\nseed = 4\n");
    const auto r = cli_run({"solve", "--config", dir / "run.cfg", "--delta", "7", "--out", dir.path.string()});
    REQUIRE(r.code == 0);
    const auto loaded = io::policy_from_json(io::read_json(dir / "policy.json"));
    CHECK(loaded.params.p == 0.3);
    CHECK(loaded.params.delta == 7);
    CHECK(loaded.policy.lambda == 0.5);

    io::write_file(dir / "bad.cfg", "nonsense = 1\n");
    CHECK(cli_run({"solve", "--config", dir / "bad.cfg", "--out", dir.path.string()}).code == 1);
    CHECK(cli_run({"solve", "--config", dir / "missing.cfg", "--out", dir.path.string()}).code == 1);
}

TEST_CASE("cli cmdp")
{
    TempDir dir("cmdp");
    auto r = cli_run({"cmdp", "--delta", "6", "--d", "1000000", "--out", dir.path.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("constraint slack at lambda=0") != std::string::npos);
    r = cli_run({"cmdp", "--delta", "6", "--d", "0", "--out", dir.path.string()});
    REQUIRE(r.code == 0);
    const auto report = io::read_json(dir / "dual_report.json");
    CHECK(report.at("blended_constraint").get<double>() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(report.contains("duality_gap"));
    CHECK(fs::exists(dir / "mixture.json"));
    CHECK(lines_of(io::read_file(dir / "lambda_trace.csv"))[1] == "lambda,gain,constraint_avg,dual_value");
}

TEST_CASE("cli simulate")
{
    TempDir dir("sim");
    auto r = cli_run({"simulate", "--baseline", "--p", "0", "--horizon", "5000", "--reps", "2", "--trace", "50",
                      "--out", dir.path.string()});
    REQUIRE(r.code == 0);
    const auto metrics = lines_of(io::read_file(dir / "metrics.csv"));
    REQUIRE(metrics.size() >= 4);
    CHECK(metrics[1] == "metric,mean,half_width,nonstationary");
    bool su_row = false;
    for (const auto& line : metrics)
        if (line.rfind("avg_aoi_su,1,", 0) == 0) su_row = true;
    CHECK(su_row);
    CHECK(lines_of(io::read_file(dir / "trace.csv")).size() == 52);

    // simulate a stored policy
    CHECK(cli_run({"solve", "--delta", "6", "--out", dir.path.string()}).code == 0);
    r = cli_run({"simulate", "--policy", dir / "policy.json", "--horizon", "5000", "--reps", "2", "--out",
                 dir.path.string()});
    CHECK(r.code == 0);
    CHECK(cli_run({"cmdp", "--delta", "6", "--d", "0.5", "--out", dir.path.string()}).code == 0);
    r = cli_run({"simulate", "--policy", dir / "mixture.json", "--horizon", "5000", "--reps", "2", "--out",
                 dir.path.string()});
    CHECK(r.code == 0);
}

TEST_CASE("cli sweep over lambda")
{
    TempDir dir("sweep");
    const auto r = cli_run({"sweep", "--delta", "8", "--lambda-grid", "0,0.3,0.9,3,10", "--out", dir.path.string()});
    REQUIRE(r.code == 0);
    const auto rows = lines_of(io::read_file(dir / "constraint_curve.csv"));
    REQUIRE(rows.size() == 7);
    double prev = 1e300;
    for (std::size_t i = 2; i < rows.size(); ++i) {
        const auto c1 = rows[i].find(',');
        const auto c2 = rows[i].find(',', c1 + 1);
        const auto c3 = rows[i].find(',', c2 + 1);
        const double c = std::stod(rows[i].substr(c2 + 1, c3 - c2 - 1));
        CHECK(c <= prev + 1e-9);
        prev = c;
    }
}

TEST_CASE("cli verify")
{
    TempDir dir("verify");
    auto r = cli_run({"verify", "--delta", "10", "--oracle-delta", "3"});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);

    CHECK(cli_run({"solve", "--delta", "6", "--out", dir.path.string()}).code == 0);
    CHECK(cli_run({"verify", "--policy", dir / "policy.json"}).code == 0);

    // corrupt the Type1 row so a_p matters
    auto doc = io::read_json(dir / "policy.json");
    for (auto& row : doc["states"])
        if (row[0] == 2 && row[2] == 0 && row[3] == 0) row[4] = row[4] == "update" ? "silent" : "update";
    io::write_json(dir / "corrupt.json", doc);
    r = cli_run({"verify", "--policy", dir / "corrupt.json"});
    CHECK(r.code != 0);
    CHECK(r.out.find("StructureError") != std::string::npos);
}
