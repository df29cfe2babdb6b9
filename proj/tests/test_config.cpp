#include <doctest.h>

#include <fstream>

#include "idcr/config.hpp"
#include "idcr/svg.hpp"

using namespace idcr;
using nlohmann::json;

TEST_CASE("defaults parse from an empty object") {
    RunConfig c = parse_run_config(json::object());
    CHECK(c.data.count == 200);
    CHECK(c.grpo.train.group_size == 8);
    CHECK(c.grpo.train.clip_eps == 0.2);
    CHECK(c.grpo.train.kl_coeff == 0.01);
    CHECK(c.grpo.train.lr == 1e-5);
    CHECK(c.grpo.train.batch_size == 32);
    CHECK(c.reward.w_fid == 0.6);
    CHECK(c.reward.w_qual == 0.4);
    CHECK(c.eval.cfg.cfg_scale == 1.5);
    CHECK(c.model.backbone.depth == 6);
    CHECK(c.model.backbone.hia_depth == 4);
}

TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_AS(parse_run_config(json{{"nope", 1}}), config_error);
    CHECK_THROWS_AS(parse_run_config(json{{"data", {{"cuont", 5}}}}), config_error);
    CHECK_THROWS_AS(parse_run_config(json{{"grpo", {{"group_sz", 4}}}}), config_error);
}

TEST_CASE("bad values are rejected") {
    CHECK_THROWS_AS(parse_run_config(json{{"data", {{"count", "many"}}}}), config_error);
    CHECK_THROWS_AS(parse_run_config(json{{"data", {{"count", -3}}}}), config_error);
    CHECK_THROWS_AS(parse_run_config(json{{"grpo", {{"group_size", 1}}}}), config_error);
    CHECK_THROWS_AS(parse_run_config(json{{"eval", {{"mode", "sorta"}}}}), config_error);
    CHECK_THROWS_AS(parse_run_config(json{{"reward", {{"w_fid", 0.9}}}}), config_error);
    CHECK_THROWS_AS(parse_run_config(json{{"model", {{"hidden", 30}}}}), config_error);
    CHECK_THROWS_AS(parse_run_config(json::array()), config_error);
}

TEST_CASE("model section inherits data dims") {
    RunConfig c =
        parse_run_config(json{{"data", {{"frames", 4}, {"height", 8}, {"width", 8}}},
                              {"model", {{"patch_s", 2}}}});
    CHECK(c.model.backbone.frames == 4);
    CHECK(c.model.backbone.height == 8);
    CHECK(c.model.cond.hidden == c.model.backbone.hidden);
}

TEST_CASE("missing config file is a config error, empty path means defaults") {
    CHECK_THROWS_AS(load_run_config("definitely_not_here.json"), config_error);
    RunConfig c = load_run_config("");
    CHECK(c.grpo.steps == 300);
}

TEST_CASE("resolved config round-trips through the parser") {
    RunConfig c = parse_run_config(
        json{{"grpo", {{"lr", 3e-5}, {"steps", 12}}}, {"eval", {{"mode", "sde"}}}});
    json j = resolved_json(c);
    RunConfig d = parse_run_config(j);
    CHECK(d.grpo.train.lr == 3e-5);
    CHECK(d.grpo.steps == 12);
    CHECK(d.eval.cfg.mode == SampleMode::SDE);
    CHECK(resolved_json(d) == j);
}

TEST_CASE("svg chart renders one polyline per series") {
    std::string svg = svg_line_chart("demo", {{"a", {0.0, 0.5, 1.0}}, {"b", {1.0, 0.25}}});
    CHECK(svg.rfind("<svg", 0) == 0);
    size_t count = 0;
    for (size_t p = svg.find("<polyline"); p != std::string::npos;
         p = svg.find("<polyline", p + 1))
        ++count;
    CHECK(count == 2);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("demo") != std::string::npos);
}
