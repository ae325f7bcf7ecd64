#include <doctest.h>

#include "poselift/config_io.hpp"
#include "poselift/errors.hpp"

using namespace poselift;

TEST_SUITE("config") {

TEST_CASE("empty text gives the desk profile") {
    auto c = parse_run_config("");
    CHECK(c.model.frames == 27);
    CHECK(c.model.feature_dim == 64);
    CHECK(c.model.hidden_dim == 128);
    CHECK(c.stages[0].epochs == 20);
    CHECK(c.stages[2].epochs == 5);
    CHECK(c.stages[1].batch_size == 32);
    CHECK(c.seed == 1);
}

TEST_CASE("paper profile") {
    auto c = parse_run_config("[run]\nprofile = paper\n");
    CHECK(c.model.frames == 243);
    CHECK(c.model.tcn_channels == 512);
    CHECK(c.model.hidden_dim == 1024);
    CHECK(c.model.tcn_dropout == 0.2);
    CHECK(c.model.dense_dropout == 0.25);
    CHECK(c.stages[0].batch_size == 1024);
    CHECK(c.stages[2].lr == 5e-4);
}

TEST_CASE("format and parse round trip") {
    auto c = RunConfig::desk_profile();
    c.seed = 77;
    c.model.flags = {true, true, true};
    c.model.temporal_op = TemporalOperator::parse("SUB(9f)");
    c.model.tcn_dropout = 0.125;
    c.stages[1].lr = 3.3e-4;
    c.stages[0].adam.weight_decay = 0.02;
    for (auto& s : c.stages) s.adam.weight_decay = 0.02;
    c.model.partition.names = {"upper", "lower"};
    c.model.partition.groups = {{0, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16}, {1, 2, 3, 4, 5, 6}};
    const auto text = format_run_config(c);
    auto back = parse_run_config(text);
    CHECK(format_run_config(back) == text);
    CHECK(back.seed == 77);
    CHECK(back.model.architecture_hash() == c.model.architecture_hash());
    CHECK(back.stages[1].lr == 3.3e-4);
    CHECK(back.stages[2].adam.weight_decay == 0.02);
    CHECK(back.model.partition.names == c.model.partition.names);
}

TEST_CASE("invalid configs are rejected") {
    CHECK_THROWS_AS(parse_run_config("[model]\nframes = 26\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[model]\nframes = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[model]\nfeature_dims = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[models]\nframes = 27\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[model]\ninput_abs = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[model]\ntemporal_op = DIV\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[partition]\na = 0,1\nb = 1,2\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[run]\nprofile = huge\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[stage2]\nbatch_size = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[model]\ninput_abs = false\n"), ConfigError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/config.ini"), ConfigError);
}

}
