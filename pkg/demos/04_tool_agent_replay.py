"""Replaying a recorded tool-agent session, offline and byte-stable.

The agent loop gives the model two tools: a Virginia-restricted geocoder
and a spherical-centroid helper. Geocode results live in a JSONL cache,
so a session recorded once replays forever without a provider. This
script replays a six-lookup session that triangulates a grant between
two swamps and averages the two plausible anchors.
"""

import tempfile
from pathlib import Path

from grantgeo import AgentBudget, FixtureBackend, Geocoder, GrantAbstract, ModelConfig, run_tool_chain
from grantgeo.agent import DEFAULT_STRATEGY, write_geocode_cache
from grantgeo.gateway import text_turn, tool_call_turn

GRANT_TEXT = (
    "WILLIAM WILLIAMS, 400 acs., on 8. side of the main Black Water Swamp; "
    "by run of Holloway Sw; 24 Apr. 1703, p. 519."
)

LOOKUPS = [
    ("Holloway Swamp, Sussex County, Virginia", 36.9058167, -77.2405153, "Sussex County, VA, USA"),
    ("Blackwater Swamp, Sussex County, Virginia", 37.10810973, -77.15139208, "Blackwater Swamp, Virginia 23842, USA"),
    ("Holloway Swamp and Blackwater Swamp confluence, Virginia", 37.4315734, -78.6568942, "Virginia, USA"),
    ("Holloway Branch, Blackwater Swamp, Prince George County, Virginia", 37.1733, -77.2396666, "Blackwater Dr, Virginia 23842, USA"),
    ("Halloway Swamp, Virginia", 37.4315734, -78.6568942, "Virginia, USA"),
    ("Holloway Swamp, Prince George County, Virginia", 37.1593052, -77.2405153, "Prince George County, VA, USA"),
]
ANCHORS = [{"lat": 37.1733, "lng": -77.2396666}, {"lat": 37.1593052, "lng": -77.2405153}]

with tempfile.TemporaryDirectory() as tmp:
    cache_path = Path(tmp) / "geocache.jsonl"
    write_geocode_cache(
        cache_path,
        [
            {
                "query": q,
                "strategy": DEFAULT_STRATEGY,
                "result": {"lat": lat, "lng": lng, "formatted_address": addr,
                           "strategy": DEFAULT_STRATEGY, "query_used": q},
            }
            for q, lat, lng, addr in LOOKUPS
        ],
    )

    script = [tool_call_turn("geocode_place", {"query": q}, 200, 40) for q, *_ in LOOKUPS]
    script.append(tool_call_turn("compute_centroid", {"points": ANCHORS}, 200, 40))
    script.append(text_turn("37.166303, -77.240091", 200, 30))

    grant = GrantAbstract.from_text("grant_04", GRANT_TEXT)
    prediction = run_tool_chain(
        FixtureBackend(script),
        Geocoder(cache_path=cache_path),
        ModelConfig("o3-2025-04-16", reasoning_effort="medium"),
        grant,
        AgentBudget(max_tool_calls=10),
        method_id="T-2",
    )

print(f"final answer : {prediction.run.raw_response}")
print(f"tool calls   : {len(prediction.run.tool_calls)} (budget 10)\n")
for record in prediction.run.tool_calls:
    marker = " <- backs the final answer" if record.selected else ""
    if record.tool_name == "geocode_place":
        print(f"  {record.turn_index}. geocode {record.arguments['query']!r}{marker}")
    else:
        print(f"  {record.turn_index}. centroid of {len(record.arguments['points'])} anchors{marker}")
