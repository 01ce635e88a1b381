"""County-centroid, heuristic-geoparse, and entity-pipeline baselines."""

from __future__ import annotations

import random

import pytest

from grantgeo.baselines import (
    CountyCentroidTable,
    EmptyGold,
    GazetteerEntry,
    HeuristicParams,
    ResolvedToponym,
    VIRGINIA_CENTER,
    default_entity_extractor,
    expand_abbreviations,
    extract_county,
    gazetteer_resolver,
    heuristic_geoparse,
    packaged_gazetteer,
    predict_county_centroid,
    predict_ner_pipeline,
    tune_heuristic_grid,
)
from grantgeo.corpus import GrantAbstract
from grantgeo.geo import Coordinate, VIRGINIA_BBOX, haversine_km, within_bbox

TABLE = CountyCentroidTable.packaged()


class TestExtractCounty:
    def test_co_dot_form(self):
        assert extract_county("100 acs. in Henrico Co. on the north side of the river") == "Henrico"

    def test_city_of_form(self):
        assert extract_county("near the City of Norfolk, beg. at the bridge") == "Norfolk"

    def test_county_of_form(self):
        assert extract_county("in the County of Essex; on Dragon Swamp") == "Essex"

    def test_county_suffix_form(self):
        assert extract_county("bounded by Surry County line") == "Surry"

    def test_no_pattern(self):
        assert extract_county("on the Ridge Path") is None

    def test_uppercase_normalized(self):
        assert extract_county("HENRICO CO.") == "Henrico"
        assert extract_county("CITY OF NORFOLK") == "Norfolk"

    def test_multiword_names(self):
        assert extract_county("on the Nottoway River in Prince George Co.") == "Prince George"
        assert extract_county("in Isle of Wight County, by the mill") == "Isle of Wight"
        # ampersand canonicalizes to the table's "and" spelling
        assert extract_county("in King & Queen Co. beg. at the swamp") == "King and Queen"

    def test_first_match_wins(self):
        assert extract_county("in Surry Co. adj. Prince George Co.") == "Surry"

    def test_clause_boundary_respected(self):
        assert extract_county("by run of Holloway Swamp; Sussex Co.") == "Sussex"


class TestPredictCountyCentroid:
    def test_statewide_fallback(self):
        coordinate, flag = predict_county_centroid("on the Ridge Path to the Indian towne", TABLE)
        assert coordinate == VIRGINIA_CENTER
        assert flag == "statewide"

    def test_prince_george_from_packaged_table(self):
        coordinate, flag = predict_county_centroid("Prince George Co.", TABLE)
        assert coordinate == TABLE.get("Prince George")
        assert flag == "county"

    def test_case_insensitive_lookup(self):
        upper, _ = predict_county_centroid("HENRICO CO.", TABLE)
        mixed, _ = predict_county_centroid("Henrico Co.", TABLE)
        assert upper == mixed == TABLE.get("henrico")

    def test_ampersand_alias(self):
        assert TABLE.get("King & Queen") == TABLE.get("King and Queen")

    def test_unknown_county_falls_back(self):
        coordinate, flag = predict_county_centroid("in Atlantis Co.", TABLE)
        assert coordinate == VIRGINIA_CENTER
        assert flag == "statewide"

    def test_all_centroids_inside_box(self):
        # construction enforces it; double-check the packaged file
        assert len(TABLE) > 100


class TestExpandAbbreviations:
    def test_creek(self):
        assert expand_abbreviations("Cr.") == "Creek"

    def test_swamp_with_semicolon(self):
        assert expand_abbreviations("run of Holloway Sw;") == "run of Holloway Swamp;"

    def test_no_hits_identity(self):
        text = "on the south side of the river"
        assert expand_abbreviations(text) == text

    def test_word_boundaries_respected(self):
        assert "Sweet" in expand_abbreviations("Sweet Hall")
        assert expand_abbreviations("Acs is a word") == "Acs is a word"

    def test_full_sample_text(self):
        out = expand_abbreviations(
            "WILLIAM WILLIAMS, 400 acs., on 8. side of the main Black Water Swamp; by run of Holloway Sw; 24 Apr. 1703"
        )
        assert "400 acres," in out
        assert "Holloway Swamp;" in out

    def test_custom_table(self):
        assert expand_abbreviations("Gt. Swamp", {"Gt.": "Great"}) == "Great Swamp"


def _resolver_returning(candidates):
    def resolve(text):
        return list(candidates)

    return resolve


class TestHeuristicGeoparse:
    PARAMS = HeuristicParams(confidence_threshold=0.5, bbox_margin_deg=0.0, distance_gate_km=25.0)

    def test_in_state_candidate_within_gate(self):
        henrico = TABLE.get("Henrico")
        near = Coordinate(henrico.lat + 0.09, henrico.lon)  # ~10 km north
        resolver = _resolver_returning([ResolvedToponym("mill", near, 0.9)])
        coordinate, flag = heuristic_geoparse("by the mill in Henrico Co.", resolver, TABLE, self.PARAMS)
        assert coordinate == near
        assert flag == "entity"
        assert haversine_km(coordinate, henrico) <= 25.0

    def test_out_of_box_candidate_falls_back_to_county(self):
        far = Coordinate(40.8, -74.0)  # well outside Virginia
        resolver = _resolver_returning([ResolvedToponym("mill", far, 0.9)])
        coordinate, flag = heuristic_geoparse("by the mill in Henrico Co.", resolver, TABLE, self.PARAMS)
        assert coordinate == TABLE.get("Henrico")
        assert flag == "county"

    def test_empty_resolver_no_county_statewide(self):
        coordinate, flag = heuristic_geoparse("on the Ridge Path", _resolver_returning([]), TABLE, self.PARAMS)
        assert coordinate == VIRGINIA_CENTER
        assert flag == "statewide"

    def test_low_confidence_filtered(self):
        henrico = TABLE.get("Henrico")
        near = Coordinate(henrico.lat + 0.05, henrico.lon)
        resolver = _resolver_returning([ResolvedToponym("mill", near, 0.2)])
        coordinate, flag = heuristic_geoparse("in Henrico Co.", resolver, TABLE, self.PARAMS)
        assert flag == "county"

    def test_distance_gate_enforced(self):
        henrico = TABLE.get("Henrico")
        far_in_state = Coordinate(36.7, -82.0)  # inside box, far from Henrico
        resolver = _resolver_returning([ResolvedToponym("mill", far_in_state, 0.99)])
        coordinate, flag = heuristic_geoparse("in Henrico Co.", resolver, TABLE, self.PARAMS)
        assert flag == "county"
        assert coordinate == henrico

    def test_gate_skipped_without_county(self):
        spot = Coordinate(36.7, -82.0)
        resolver = _resolver_returning([ResolvedToponym("mill", spot, 0.99)])
        coordinate, flag = heuristic_geoparse("by the old mill", resolver, TABLE, self.PARAMS)
        assert coordinate == spot
        assert flag == "entity"

    def test_highest_score_wins(self):
        henrico = TABLE.get("Henrico")
        a = Coordinate(henrico.lat + 0.02, henrico.lon)
        b = Coordinate(henrico.lat - 0.02, henrico.lon)
        resolver = _resolver_returning(
            [ResolvedToponym("a", a, 0.7), ResolvedToponym("b", b, 0.95)]
        )
        coordinate, _ = heuristic_geoparse("in Henrico Co.", resolver, TABLE, self.PARAMS)
        assert coordinate == b

    def test_variants_tried_until_resolver_answers(self):
        henrico = TABLE.get("Henrico")
        near = Coordinate(henrico.lat + 0.02, henrico.lon)
        seen = []

        def resolver(text):
            seen.append(text)
            # only answers once abbreviations are expanded
            if "Creek" in text:
                return [ResolvedToponym("creek", near, 0.9)]
            return []

        coordinate, flag = heuristic_geoparse("on Deep Cr. in Henrico Co.", resolver, TABLE, self.PARAMS)
        assert flag == "entity"
        assert len(seen) >= 2

    def test_never_violates_filters(self):
        rng = random.Random(3)
        box = VIRGINIA_BBOX.with_margin(self.PARAMS.bbox_margin_deg)
        for _ in range(100):
            cands = [
                ResolvedToponym(
                    f"c{i}",
                    Coordinate(rng.uniform(33, 42), rng.uniform(-85, -70)),
                    rng.random(),
                )
                for i in range(rng.randint(0, 4))
            ]
            coordinate, flag = heuristic_geoparse(
                "by the mill in Henrico Co.", _resolver_returning(cands), TABLE, self.PARAMS
            )
            if flag == "entity":
                matching = [c for c in cands if c.coordinate == coordinate]
                assert matching
                assert all(c.confidence >= self.PARAMS.confidence_threshold for c in matching[:1])
                assert within_bbox(coordinate, box)
                assert haversine_km(coordinate, TABLE.get("Henrico")) <= self.PARAMS.distance_gate_km


class TestTuneHeuristicGrid:
    def _gold(self, truth):
        return [GrantAbstract.from_text("g1", "by the mill in Henrico Co.", truth)]

    def test_single_combination(self):
        gold = self._gold(TABLE.get("Henrico"))
        params = tune_heuristic_grid(gold, _resolver_returning([]), TABLE, [0.5], [0.1], [35.0])
        assert params == HeuristicParams(0.5, 0.1, 35.0)

    def test_tight_gate_dominates(self):
        henrico = TABLE.get("Henrico")
        # candidate ~30 km from the county centroid; truth at the centroid:
        # gate 25 rejects it (county fallback, error 0), gate 50 accepts (error ~30)
        off = Coordinate(henrico.lat + 0.27, henrico.lon)
        assert 25.0 < haversine_km(off, henrico) < 50.0
        gold = self._gold(henrico)
        resolver = _resolver_returning([ResolvedToponym("off", off, 0.9)])
        params = tune_heuristic_grid(gold, resolver, TABLE, [0.5], [0.0], [25.0, 50.0])
        assert params.distance_gate_km == 25.0
        # brute-force cross-check of both candidates
        errors = {}
        for gate in (25.0, 50.0):
            p = HeuristicParams(0.5, 0.0, gate)
            coordinate, _ = heuristic_geoparse(gold[0].text, resolver, TABLE, p)
            errors[gate] = haversine_km(coordinate, henrico)
        assert errors[25.0] < errors[50.0]

    def test_tie_breaks_lexicographically(self):
        gold = self._gold(TABLE.get("Henrico"))
        params = tune_heuristic_grid(
            gold, _resolver_returning([]), TABLE, [0.9, 0.1], [0.3, 0.2], [50.0, 25.0]
        )
        assert params == HeuristicParams(0.1, 0.2, 25.0)

    def test_empty_gold(self):
        with pytest.raises(EmptyGold):
            tune_heuristic_grid([], _resolver_returning([]), TABLE, [0.5], [0.1], [25.0])


class TestPredictNerPipeline:
    def test_county_fallback_when_no_entity_resolves(self):
        coordinate, flag = predict_ner_pipeline(
            "some text naming Henrico Co.", lambda text: [], [], TABLE
        )
        assert coordinate == TABLE.get("Henrico")
        assert flag == "county"

    def test_statewide_when_nothing_extractable(self):
        coordinate, flag = predict_ner_pipeline("nothing here", lambda text: [], [], TABLE)
        assert coordinate == VIRGINIA_CENTER
        assert flag == "statewide"

    def test_population_ranking(self):
        gaz = [
            GazetteerEntry("Cypress Swamp", Coordinate(36.9, -77.0), 100, "swamp"),
            GazetteerEntry("Cypress", Coordinate(37.3, -77.8), 10_000, "populated_place"),
        ]
        coordinate, flag = predict_ner_pipeline(
            "near Cypress Swamp", lambda text: ["Cypress Swamp"], gaz, TABLE
        )
        assert flag == "entity"
        assert coordinate == Coordinate(37.3, -77.8)

    def test_population_tie_breaks_by_name(self):
        gaz = [
            GazetteerEntry("Mill B", Coordinate(37.2, -77.2), 10, "mill"),
            GazetteerEntry("Mill A", Coordinate(37.1, -77.1), 10, "mill"),
        ]
        coordinate, _ = predict_ner_pipeline(
            "x", lambda text: ["Mill A", "Mill B"], gaz, TABLE
        )
        assert coordinate == Coordinate(37.1, -77.1)

    def test_out_of_state_gazetteer_rows_ignored(self):
        gaz = [GazetteerEntry("Boston", Coordinate(42.36, -71.06), 600_000, "city")]
        coordinate, flag = predict_ner_pipeline("near Boston", lambda text: ["Boston"], gaz, TABLE)
        assert flag == "statewide"

    def test_historic_parish_matches_modern_town(self):
        # regression fixture: a parish reference resolves to the modern
        # far-southwest town of the same name, and the pipeline must
        # faithfully report that (wrong) answer
        coordinate, flag = predict_ner_pipeline(
            "200 acs. in St. Paul's Parish, on the north side of the river",
            default_entity_extractor,
            packaged_gazetteer(),
            TABLE,
        )
        assert flag == "entity"
        assert coordinate == Coordinate(36.9051, -82.3124)
        central_va_truth = Coordinate(37.6, -77.4)
        assert haversine_km(coordinate, central_va_truth) > 350


class TestTotality:
    def test_fuzz_corpus_always_returns_coordinate(self):
        rng = random.Random(11)
        words = [
            "swamp", "creek", "river", "Henrico", "Co.", "adj.", "Wm.", "SMITH,", "400",
            "acs.,", "on", "S.", "side", "of", "the", "main", "branch;", "beg.", "at",
            "a", "corner", "pine", "Indian", "path", "Sw.", "Cr.", "1703", "p.", "519",
        ]
        resolver = gazetteer_resolver(packaged_gazetteer())
        params = HeuristicParams(0.5, 0.2, 25.0)
        for _ in range(200):
            text = " ".join(rng.choice(words) for _ in range(rng.randint(0, 40)))
            for coordinate, flag in (
                predict_county_centroid(text, TABLE),
                heuristic_geoparse(text, resolver, TABLE, params),
                predict_ner_pipeline(text, default_entity_extractor, packaged_gazetteer(), TABLE),
            ):
                assert coordinate is not None
                assert within_bbox(coordinate, VIRGINIA_BBOX.with_margin(0.2)) or coordinate == VIRGINIA_CENTER

    def test_no_county_texts_return_exact_statewide_center(self):
        texts = ["", "on the ridge path", "beg. at a white oak; to a pine; to the river"]
        for text in texts:
            coordinate, flag = predict_county_centroid(text, TABLE)
            assert (coordinate.lat, coordinate.lon) == (37.4316, -78.6569)
            assert flag == "statewide"
