#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "mistfed/csv.hpp"

using mistfed::CsvSchema;
using mistfed::ModalityKind;
using mistfed::ModalitySpec;

namespace {

struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& name, const std::string& content)
        : path("./" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempCsv() { std::remove(path.c_str()); }
};

CsvSchema basic_schema() {
    CsvSchema schema;
    schema.columns["temp"] = mistfed::ColumnRole::feature_numeric;
    schema.columns["proto"] = mistfed::ColumnRole::feature_categorical;
    schema.columns["label"] = mistfed::ColumnRole::label;
    schema.columns["ts"] = mistfed::ColumnRole::ignore;
    return schema;
}

ModalitySpec modality() { return {"sensor", 1, ModalityKind::telemetry}; }

}  // namespace

TEST_CASE("min-max scaling maps [2,4,6] to [0, 0.5, 1]") {
    TempCsv file("scale.csv",
                 "ts,temp,proto,label\n"
                 "1,2,tcp,normal\n"
                 "2,4,tcp,attack\n"
                 "3,6,tcp,normal\n");
    const auto ingest = mistfed::load_csv(file.path, basic_schema(), modality());
    REQUIRE(ingest.block.samples.size() == 3);
    CHECK(ingest.block.samples[0].x[0] == doctest::Approx(0.0));
    CHECK(ingest.block.samples[1].x[0] == doctest::Approx(0.5));
    CHECK(ingest.block.samples[2].x[0] == doctest::Approx(1.0));
    // one numeric + one single-category one-hot
    CHECK(ingest.stats.feature_dim == 2);
    CHECK(ingest.block.modality.raw_dim == 2);
}

TEST_CASE("missing cells mark the row invalid but keep it") {
    TempCsv file("missing.csv",
                 "ts,temp,proto,label\n"
                 "1,2,tcp,normal\n"
                 "2,,udp,attack\n"
                 "3,6,tcp,normal\n");
    const auto ingest = mistfed::load_csv(file.path, basic_schema(), modality());
    CHECK(ingest.stats.rows_ingested == 3);
    CHECK(ingest.stats.rows_invalid == 1);
    CHECK_FALSE(ingest.block.samples[1].valid);
    CHECK(ingest.block.samples[0].valid);
}

TEST_CASE("label mapping sends normal to class 0 and the rest in sorted order") {
    TempCsv file("labels.csv",
                 "ts,temp,proto,label\n"
                 "1,1,tcp,ddos\n"
                 "2,2,tcp,Normal\n"
                 "3,3,tcp,backdoor\n"
                 "4,4,tcp,ddos\n");
    const auto ingest = mistfed::load_csv(file.path, basic_schema(), modality());
    CHECK(ingest.stats.label_mapping.at("Normal") == 0);
    CHECK(ingest.stats.label_mapping.at("backdoor") == 1);
    CHECK(ingest.stats.label_mapping.at("ddos") == 2);
    CHECK(ingest.num_classes == 3);
    CHECK(ingest.block.samples[0].label == 2);
    CHECK(ingest.block.samples[1].label == 0);
}

TEST_CASE("categorical one-hot uses the sorted category set") {
    TempCsv file("onehot.csv",
                 "ts,temp,proto,label\n"
                 "1,1,udp,normal\n"
                 "2,2,tcp,attack\n"
                 "3,3,icmp,normal\n");
    const auto ingest = mistfed::load_csv(file.path, basic_schema(), modality());
    CHECK(ingest.stats.feature_dim == 4);  // temp + {icmp, tcp, udp}
    // row 0 is udp -> last one-hot slot
    CHECK(ingest.block.samples[0].x[1] == 0.0);
    CHECK(ingest.block.samples[0].x[2] == 0.0);
    CHECK(ingest.block.samples[0].x[3] == 1.0);
}

TEST_CASE("empty and missing files fail ingestion") {
    TempCsv file("empty.csv", "");
    CHECK_THROWS_AS(mistfed::load_csv(file.path, basic_schema(), modality()),
                    mistfed::IngestionError);
    TempCsv header_only("header.csv", "ts,temp,proto,label\n");
    CHECK_THROWS_AS(mistfed::load_csv(header_only.path, basic_schema(), modality()),
                    mistfed::IngestionError);
    CHECK_THROWS_AS(mistfed::load_csv("./no_such_file.csv", basic_schema(), modality()),
                    mistfed::IngestionError);
}

TEST_CASE("a missing label column fails ingestion") {
    TempCsv file("nolabel.csv",
                 "ts,temp,proto\n"
                 "1,2,tcp\n");
    CHECK_THROWS_AS(mistfed::load_csv(file.path, basic_schema(), modality()),
                    mistfed::IngestionError);
}

TEST_CASE("unparseable rows above the threshold fail with line numbers") {
    TempCsv file("broken.csv",
                 "ts,temp,proto,label\n"
                 "1,2,tcp,normal\n"
                 "2,3,udp\n"
                 "3,4,tcp,attack\n");
    try {
        mistfed::load_csv(file.path, basic_schema(), modality(), 0.05);
        FAIL("expected IngestionError");
    } catch (const mistfed::IngestionError& e) {
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
    // a permissive threshold skips the bad row instead
    const auto ingest = mistfed::load_csv(file.path, basic_schema(), modality(), 0.5);
    CHECK(ingest.stats.rows_ingested == 2);
    CHECK(ingest.stats.rows_unparseable == 1);
    CHECK(ingest.stats.unparseable_rows == std::vector<std::size_t>{3});
}

TEST_CASE("quoted fields with embedded commas parse as one value") {
    CsvSchema schema;
    schema.columns["name"] = mistfed::ColumnRole::feature_categorical;
    schema.columns["v"] = mistfed::ColumnRole::feature_numeric;
    schema.columns["label"] = mistfed::ColumnRole::label;
    TempCsv file("quoted.csv",
                 "name,v,label\n"
                 "\"a,b\",1,normal\n"
                 "c,2,attack\n");
    const auto ingest = mistfed::load_csv(file.path, schema, modality());
    CHECK(ingest.stats.rows_ingested == 2);
    CHECK(ingest.stats.feature_dim == 3);  // {a,b + c} one-hot + v
}
