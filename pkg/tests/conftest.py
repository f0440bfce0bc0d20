from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from codemie.core import (
    AnnotationSet,
    Document,
    Entity,
    EntityChain,
    EntityTypeSchema,
    RelationTriple,
    VisualRegion,
    normalize,
)

settings.register_profile("default", suppress_health_check=[HealthCheck.too_slow], deadline=None)
settings.load_profile("default")

TYPES = ("PER", "LOC", "ORG", "TIME", "OTHER")
RELATIONS = ("PER-LOC_born_in", "PER-ORG_member_of", "PER-TIME_birth_time", "ORG-LOC_located_in")
IMAGES = ("a.jpg", "b.jpg", "c.jpg")


@pytest.fixture
def schema() -> EntityTypeSchema:
    return EntityTypeSchema.with_defaults(TYPES, RELATIONS)


def make_schema() -> EntityTypeSchema:
    return EntityTypeSchema.with_defaults(TYPES, RELATIONS)


def make_doc(images=IMAGES, gold=None, doc_id="d1") -> Document:
    return Document(doc_id, "some text", image_refs=tuple(images), gold=gold)


# quotes, backslashes, brackets, commas, CJK and combining marks all have to survive
_ALPHABET = st.sampled_from(list("abcXYZ019 _-'\"\\[],=.#:{}()") + ["é", "é", "北", "京", "\t", "ß"])
surfaces = st.lists(_ALPHABET, min_size=1, max_size=12).map("".join).map(normalize).filter(bool)

coords = st.floats(0.0, 1.0, allow_nan=False)
sizes = st.floats(1e-6, 1.0, allow_nan=False)


@st.composite
def annotation_sets(draw, max_items: int = 20, images=IMAGES):
    entities = draw(
        st.lists(st.builds(Entity, surfaces, st.sampled_from(TYPES)), max_size=max_items, unique=True)
    )
    n_chains = draw(st.integers(0, max_items))
    chains = []
    for i in range(n_chains):
        mentions = draw(st.lists(surfaces, min_size=1, max_size=4, unique=True))
        chains.append(EntityChain(i, tuple(mentions), draw(st.sampled_from(TYPES))))
    relations = []
    if chains:
        relations = draw(
            st.lists(
                st.builds(
                    RelationTriple,
                    st.sampled_from(RELATIONS),
                    st.integers(0, n_chains - 1),
                    st.integers(0, n_chains - 1),
                ),
                max_size=max_items,
            )
        )
    regions = draw(
        st.lists(
            st.builds(VisualRegion, st.sampled_from(images), st.sampled_from(TYPES), coords, coords, sizes, sizes),
            max_size=max_items,
        )
        if images
        else st.just([])
    )
    return AnnotationSet(tuple(entities), tuple(chains), tuple(relations), tuple(regions))


# --- acceptance reporting ---------------------------------------------------

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    number = getattr(report, "criterion", None)
    if number is None:
        return
    if report.when == "call" or report.failed:
        prev = _criteria.get(number[0])
        status = "FAIL" if report.failed or (prev and prev[0] == "FAIL") else "PASS"
        _criteria[number[0]] = (status, number[1])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"[{status}] criterion {number:>2}: {title}")
