"""Construct the bundled default schema (4 domains) and its seed dialogues.

Run from the repo root:  python scripts/build_default_schema.py
Rewrites src/prefteach/data/default_schema.json deterministically.
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from prefteach.simulator import (
    ProviderPolicy,
    SeekerPolicy,
    VariationConfig,
    run_interaction,
)
from prefteach.types import (
    ActionKind,
    ActionSignature,
    ArgumentSpec,
    Catalog,
    DomainSchema,
    EntityTransferGraph,
    GoalVertex,
    NlgTemplate,
    dump_schema,
    validate_schema,
)

SPORT_TEAMS = [
    "the yankees", "the knicks", "the warriors", "the lakers", "the giants",
    "san francisco giants", "new york giants", "golden state warriors",
    "seattle mariners", "the dodgers", "the celtics", "the bulls",
    "the red sox", "the cubs", "the packers", "the patriots",
    "the rangers", "the sharks", "the kings", "the mets",
    "tacoma rainiers", "sacramento river cats", "el paso chihuahuas",
    "durham bulls", "toledo mud hens", "round rock express",
    "lehigh valley ironpigs", "reno aces",
]
CUISINES = [
    "thai", "mexican", "seafood", "vegetarian", "italian", "sushi",
    "barbecue", "dim sum", "ramen", "korean", "indian", "vegan",
    "ethiopian", "peruvian", "dumplings", "falafel",
]
WEATHER_PROVIDERS = [
    "big sky", "radar", "accuweather", "the weather channel",
    "dark sky", "weather underground", "storm watch", "clear skies",
]
WEATHER_CONDITIONS = [
    "weather update", "rain forecasting", "daily updating",
    "severe weather alerts", "weekend forecast", "morning briefing",
    "air quality report", "snow alerts",
]
CONFIRMATIONS = ["yes", "yeah", "sure", "go ahead", "let it be", "do it"]


def build_signatures() -> list[ActionSignature]:
    api = ActionKind.API
    nlg = ActionKind.NLG
    sigs = [
        ActionSignature(
            name="setSportAffinity", kind=api,
            arguments=(ArgumentSpec("sport_team", "sport_team"),),
            produces="setSportAffinityResult",
            kb_op="upsert", domain="sports", polarity="like", value_arg="sport_team",
        ),
        ActionSignature(
            name="deleteSportAffinity", kind=api,
            arguments=(ArgumentSpec("sport_team", "sport_team"), ArgumentSpec("confirmAction", "confirmation")),
            produces="deleteSportAffinityResult",
            kb_op="delete", domain="sports", value_arg="sport_team", destructive=True,
        ),
        ActionSignature(
            name="setDietOrCuisineAffinity", kind=api,
            arguments=(ArgumentSpec("cuisine", "cuisine"),),
            produces="setDietOrCuisineAffinityResult",
            kb_op="upsert", domain="restaurant", polarity="like", value_arg="cuisine",
        ),
        ActionSignature(
            name="deleteDietOrCuisineAffinity", kind=api,
            arguments=(ArgumentSpec("cuisine", "cuisine"), ArgumentSpec("confirmAction", "confirmation")),
            produces="deleteDietOrCuisineAffinityResult",
            kb_op="delete", domain="restaurant", value_arg="cuisine", destructive=True,
        ),
        ActionSignature(
            name="setWeatherProviderAffinity", kind=api,
            arguments=(
                ArgumentSpec("weather_provider", "weather_provider"),
                ArgumentSpec("weather_condition", "weather_condition"),
            ),
            produces="setWeatherProviderAffinityResult",
            kb_op="upsert", domain="weather", polarity="conditional",
            value_arg="weather_provider", condition_arg="weather_condition",
        ),
        ActionSignature(
            name="getAllAffinityAction", kind=api,
            produces="getAllPreferenceResult", kb_op="retrieve",
        ),
        ActionSignature(
            name="getSportAffinity", kind=api,
            produces="getSportPreferenceResult", kb_op="retrieve", domain="sports",
        ),
        ActionSignature(
            name="deleteAllAffinityAction", kind=api,
            arguments=(ArgumentSpec("confirmAction", "confirmation"),),
            produces="deleteAllPreferenceResult",
            kb_op="delete_all", destructive=True, terminal=True,
        ),
    ]
    api_names = [s.name for s in sigs]
    result_args = {
        "setSportAffinity": "setSportAffinityResult",
        "deleteSportAffinity": "deleteSportAffinityResult",
        "setDietOrCuisineAffinity": "setDietOrCuisineAffinityResult",
        "deleteDietOrCuisineAffinity": "deleteDietOrCuisineAffinityResult",
        "setWeatherProviderAffinity": "setWeatherProviderAffinityResult",
        "getAllAffinityAction": "getAllAffinityResult",
        "getSportAffinity": "getSportAffinityResult",
        "deleteAllAffinityAction": "deleteAllAffinityResult",
    }
    produces = {s.name: s.produces for s in sigs}
    for name in api_names:
        sigs.append(
            ActionSignature(
                name=f"notify_{name}_success", kind=nlg,
                arguments=(ArgumentSpec(result_args[name], produces[name]),),
            )
        )
        sigs.append(ActionSignature(name=f"notify_{name}_failure", kind=nlg))
    for etype in ("sport_team", "cuisine", "weather_provider", "weather_condition"):
        sigs.append(ActionSignature(name=f"request_{etype}", kind=nlg))
    sigs.append(
        ActionSignature(
            name="confirm_deleteSportAffinity", kind=nlg,
            arguments=(ArgumentSpec("sport_team", "sport_team"),),
        )
    )
    sigs.append(
        ActionSignature(
            name="confirm_deleteDietOrCuisineAffinity", kind=nlg,
            arguments=(ArgumentSpec("cuisine", "cuisine"),),
        )
    )
    sigs.append(ActionSignature(name="prompt_setup_preference", kind=nlg))
    sigs.append(ActionSignature(name="clarify_generic", kind=nlg))
    return sigs


SEEKER_TEMPLATES: dict[str, list[str]] = {
    "inform_setSportAffinity": [
        "{sport_team} are my favorite baseball team",
        "i love {sport_team}",
        "add {sport_team} to my favorites",
        "i am a {sport_team} fan",
        "i follow {sport_team}",
        "my favorite team is {sport_team}",
        "i root for {sport_team}",
        "put {sport_team} on my list of favorite teams",
    ],
    "inform_deleteSportAffinity": [
        "remove {sport_team} from my favorite sports teams",
        "unfollow {sport_team}",
        "i do not like {sport_team} anymore",
        "drop {sport_team} from my favorites",
        "take {sport_team} off my list",
        "stop following {sport_team}",
    ],
    "inform_setDietOrCuisineAffinity": [
        "i like to dine at {cuisine} restaurant",
        "i enjoy {cuisine} restaurant",
        "i love {cuisine} food",
        "{cuisine} is my favorite kind of food",
        "i prefer {cuisine} cooking",
        "my favorite cuisine is {cuisine}",
        "i really like eating {cuisine}",
        "save {cuisine} as my food preference",
    ],
    "inform_deleteDietOrCuisineAffinity": [
        "remove {cuisine} food from our food preferences",
        "i want you to forget my preference for {cuisine} food",
        "delete {cuisine} from my food preferences",
        "i am done with {cuisine} food",
        "no more {cuisine} for me",
        "forget that i like {cuisine}",
    ],
    "inform_setWeatherProviderAffinity": [
        "i prefer {weather_provider} for {weather_condition}",
        "always use {weather_provider} for {weather_condition}",
        "use {weather_provider} when i ask for {weather_condition}",
        "{weather_provider} is my choice for {weather_condition}",
        "for {weather_condition} i want {weather_provider}",
        "switch to {weather_provider} for {weather_condition}",
    ],
    "inform_getAllAffinityAction": [
        "what are my preferences",
        "show me everything you have learned about me",
        "list all my preferences",
        "tell me what preferences i have taught you",
        "what do you know about my preferences",
        "read back my saved preferences",
    ],
    "inform_getSportAffinity": [
        "what are my favorite teams",
        "which sport teams do i follow",
        "show my sports preferences",
        "tell me my favorite sport teams",
        "list the teams i like",
    ],
    "inform_deleteAllAffinityAction": [
        "forget everything i have taught you",
        "forget everything you've learned about my preferences",
        "delete all my preferences",
        "reset my preferences",
        "wipe out all of my preferences",
        "clear everything i taught you",
        "start over and forget my preferences",
    ],
    "inform_setSportAffinity_partial": [
        "i want to add a new favorite team",
        "help me set a sports team preference",
        "i have a new team to follow",
        "set up a team for me",
    ],
    "inform_deleteSportAffinity_partial": [
        "i want to remove one of my teams",
        "drop one of my sport teams",
        "remove a team from my favorites",
        "i need to unfollow a team",
    ],
    "inform_setDietOrCuisineAffinity_partial": [
        "i want to set a food preference",
        "help me pick a cuisine i like",
        "save a new food preference for me",
        "i have a new favorite food",
    ],
    "inform_deleteDietOrCuisineAffinity_partial": [
        "remove one of my food preferences",
        "i want to delete a cuisine preference",
        "drop one of the foods i like",
        "forget one of my food choices",
    ],
    "inform_setWeatherProviderAffinity_partial": [
        "set up my weather provider",
        "i want to pick a weather app",
        "change my weather preference",
        "help me choose a weather provider",
    ],
    "supply_sport_team": [
        "{sport_team}",
        "i meant {sport_team}",
        "it is {sport_team}",
        "use {sport_team}",
    ],
    "supply_cuisine": [
        "{cuisine}",
        "i meant {cuisine}",
        "it is {cuisine}",
        "make it {cuisine}",
    ],
    "supply_weather_provider": [
        "{weather_provider}",
        "i meant {weather_provider}",
        "use {weather_provider}",
        "go with {weather_provider}",
    ],
    "supply_weather_condition": [
        "{weather_condition}",
        "for {weather_condition}",
        "i want it for {weather_condition}",
        "it is for {weather_condition}",
    ],
    "confirm": [
        "{confirmation}",
        "{confirmation} please",
        "ok {confirmation}",
        "{confirmation} that is right",
    ],
    "closing": [
        "that is all",
        "that's all thanks",
        "i am done",
        "nothing else",
        "that is everything",
    ],
    "ask_update": [
        "what's my sports update",
        "any updates on my teams today",
        "give me my sports news update",
        "what is my update for today",
    ],
}

PROVIDER_TEMPLATES: dict[str, list[str]] = {
    "notify_setSportAffinity_success": [
        "done , i added that team to your favorites",
        "got it , your sports preference is saved",
        "all set , i will remember that team",
    ],
    "notify_deleteSportAffinity_success": [
        "done , i removed that team from your favorites",
        "okay , that team is gone from your list",
    ],
    "notify_setDietOrCuisineAffinity_success": [
        "got it , i saved your food preference",
        "done , i will remember that cuisine",
    ],
    "notify_deleteDietOrCuisineAffinity_success": [
        "done , i removed that food preference",
        "okay , that cuisine is gone from your preferences",
    ],
    "notify_setWeatherProviderAffinity_success": [
        "got it , i saved your weather provider preference",
        "done , i will use that provider",
    ],
    "notify_getAllAffinityAction_success": [
        "here is everything you have taught me : {getAllAffinityResult} . should i go ahead ?",
        "i found these preferences : {getAllAffinityResult} . do you want me to proceed ?",
    ],
    "notify_getSportAffinity_success": [
        "here are your sports preferences : {getSportAffinityResult}",
        "your saved teams : {getSportAffinityResult}",
    ],
    "notify_deleteAllAffinityAction_success": [
        "all of your preferences are gone now",
        "done , i have deleted everything you taught me",
    ],
    "request_sport_team": [
        "which sport team do you mean ?",
        "what team should i use ?",
    ],
    "request_cuisine": [
        "what is a restaurant type or cuisine you like ?",
        "which cuisine do you mean ?",
    ],
    "request_weather_provider": [
        "which weather provider should i use ?",
        "what weather app do you prefer ?",
    ],
    "request_weather_condition": [
        "for what kind of weather update ?",
        "when should i use that provider ?",
    ],
    "confirm_deleteSportAffinity": [
        "should i remove {sport_team} from your favorite teams ?",
        "you want me to drop {sport_team} , correct ?",
    ],
    "confirm_deleteDietOrCuisineAffinity": [
        "should i remove {cuisine} from your food preferences ?",
        "you want me to forget {cuisine} , correct ?",
    ],
    "prompt_setup_preference": [
        "please set up your sport preference before getting notifications",
        "you have not taught me any preferences yet , please set one up first",
    ],
    "clarify_generic": [
        "sorry , could you rephrase that ?",
        "i did not catch that , could you say it again ?",
    ],
}
for _api in (
    "setSportAffinity", "deleteSportAffinity", "setDietOrCuisineAffinity",
    "deleteDietOrCuisineAffinity", "setWeatherProviderAffinity",
    "getAllAffinityAction", "getSportAffinity", "deleteAllAffinityAction",
):
    PROVIDER_TEMPLATES[f"notify_{_api}_failure"] = [
        "sorry , i could not complete that",
        "something went wrong with that request",
    ]

# (api sequence, per-call argument values, shared-vertex pairs)
SEED_SPECS: list[tuple[list[str], list[dict[str, str]], list[tuple[int, int, str]]]] = [
    (["setSportAffinity"], [{"sport_team": "the yankees"}], []),
    (["setSportAffinity", "setDietOrCuisineAffinity"],
     [{"sport_team": "the knicks"}, {"cuisine": "thai"}], []),
    (["setDietOrCuisineAffinity"], [{"cuisine": "thai"}], []),
    (["setDietOrCuisineAffinity", "setWeatherProviderAffinity"],
     [{"cuisine": "seafood"}, {"weather_provider": "big sky", "weather_condition": "weather update"}], []),
    (["setWeatherProviderAffinity"],
     [{"weather_provider": "big sky", "weather_condition": "weather update"}], []),
    (["setSportAffinity", "getSportAffinity"], [{"sport_team": "the warriors"}, {}], []),
    (["getSportAffinity"], [{}], []),
    (["getAllAffinityAction"], [{}], []),
    (["deleteSportAffinity"], [{"sport_team": "the yankees", "confirmAction": "yes"}], []),
    (["deleteDietOrCuisineAffinity"], [{"cuisine": "mexican", "confirmAction": "yes"}], []),
    (["deleteAllAffinityAction"], [{"confirmAction": "let it be"}], []),
    (["setSportAffinity", "setSportAffinity"],
     [{"sport_team": "the giants"}, {"sport_team": "the dodgers"}], []),
    (["setWeatherProviderAffinity", "setSportAffinity"],
     [{"weather_provider": "radar", "weather_condition": "rain forecasting"},
      {"sport_team": "seattle mariners"}], []),
    # teaching-then-removal with an entity transferred between the two calls
    (["setSportAffinity", "deleteSportAffinity"],
     [{"sport_team": "san francisco giants"}, {"confirmAction": "yes"}],
     [(0, 1, "sport_team")]),
]


def build_goal(schema: DomainSchema, api_seq, arg_values, shared) -> EntityTransferGraph:
    vertices: list[GoalVertex] = []
    edges: list[tuple[int, int, str]] = []
    api_vertex_ids: list[int] = []
    entity_vertex_of: dict[tuple[int, str], int] = {}
    shared_lookup = {(dst_call, arg): src_call for src_call, dst_call, arg in shared}
    for call_i, api in enumerate(api_seq):
        sig = schema.signature(api)
        incoming = []
        for arg in sig.required_args():
            if (call_i, arg.name) in shared_lookup:
                src = entity_vertex_of[(shared_lookup[(call_i, arg.name)], arg.name)]
            else:
                value = arg_values[call_i][arg.name]
                src = len(vertices)
                vertices.append(GoalVertex(src, "seeker_entity", entity_type=arg.arg_type, value=value))
                entity_vertex_of[(call_i, arg.name)] = src
            incoming.append((src, arg.name))
        vid = len(vertices)
        vertices.append(GoalVertex(vid, "api_call", api_name=api))
        api_vertex_ids.append(vid)
        for src, name in incoming:
            edges.append((src, vid, name))
    return EntityTransferGraph(vertices=tuple(vertices), edges=tuple(edges))


def main() -> None:
    signatures = build_signatures()
    catalogs = (
        Catalog("sport_team", tuple(SPORT_TEAMS)),
        Catalog("cuisine", tuple(CUISINES)),
        Catalog("weather_provider", tuple(WEATHER_PROVIDERS)),
        Catalog("weather_condition", tuple(WEATHER_CONDITIONS)),
        Catalog("confirmation", tuple(CONFIRMATIONS)),
    )
    seeker_templates = tuple(
        NlgTemplate(act, text) for act, texts in SEEKER_TEMPLATES.items() for text in texts
    )
    provider_templates = tuple(
        NlgTemplate(act, text) for act, texts in PROVIDER_TEMPLATES.items() for text in texts
    )
    base = DomainSchema(
        signatures=tuple(signatures),
        entity_types=("sport_team", "cuisine", "weather_provider", "weather_condition", "confirmation"),
        catalogs=catalogs,
        provider_templates=provider_templates,
        seeker_templates=seeker_templates,
        seed_dialogues=(),
    )

    canonical = VariationConfig(
        entity_resample_prob=0.0, paraphrase_prob=0.0, error_injection_rate=0.0,
        mixing_ratio=(1.0, 0.0, 0.0),
    )
    seeker = SeekerPolicy(paraphrase_prob=0.0)
    provider = ProviderPolicy()
    seeds = []
    for i, (api_seq, values, shared) in enumerate(SEED_SPECS):
        goal = build_goal(base, api_seq, values, shared)
        rng = np.random.default_rng([7, i])
        seeds.append(
            run_interaction(goal, seeker, provider, base, canonical, rng, dialogue_id=f"seed-{i}")
        )

    schema = DomainSchema(
        signatures=base.signatures,
        entity_types=base.entity_types,
        catalogs=base.catalogs,
        provider_templates=base.provider_templates,
        seeker_templates=base.seeker_templates,
        seed_dialogues=tuple(seeds),
    )
    validate_schema(schema)
    out = Path(__file__).resolve().parents[1] / "src" / "prefteach" / "data" / "default_schema.json"
    dump_schema(schema, out)
    print(f"wrote {out} ({len(seeds)} seed dialogues, {len(signatures)} signatures)")


if __name__ == "__main__":
    main()
