import json

import numpy as np
import pytest

from emoloop.core import Excerpt, QUADRANTS, Quadrant, SourceType, ValidationError
from emoloop.sim_oracle import (
    Alignment,
    OracleProfile,
    default_profiles,
    get_profile,
    label,
    mirror_profile,
)


def excerpt(eid, source=SourceType.TYPE_A):
    return Excerpt(id=eid, source_type=source, features=np.zeros(4))


class TestLabel:
    def test_point_mass_always_q2(self):
        profile = OracleProfile(
            name="p",
            alignment=Alignment.CENTER,
            label_dist={SourceType.TYPE_A: (0.0, 1.0, 0.0, 0.0)},
            seed=3,
        )
        for i in range(50):
            assert label(profile, excerpt(f"e{i}")) is Quadrant.Q2

    def test_replay_determinism_any_order(self):
        profile = default_profiles(seed=5)[0]
        ids = [f"x{i:03d}" for i in range(30)]
        first = {eid: label(profile, excerpt(eid, SourceType.TYPE_B)) for eid in ids}
        for eid in reversed(ids):
            assert label(profile, excerpt(eid, SourceType.TYPE_B)) is first[eid]

    def test_law_of_large_numbers(self):
        dist = (0.1, 0.7, 0.1, 0.1)
        profile = OracleProfile(
            name="p",
            alignment=Alignment.LEFT,
            label_dist={SourceType.TYPE_B: dist},
            seed=7,
        )
        counts = {q: 0 for q in QUADRANTS}
        n = 10_000
        for i in range(n):
            counts[label(profile, excerpt(f"e{i}", SourceType.TYPE_B))] += 1
        for q, p in zip(QUADRANTS, dist):
            assert abs(counts[q] / n - p) <= 0.02

    def test_uncovered_source_type_rejected(self):
        profile = OracleProfile(
            name="p",
            alignment=Alignment.LEFT,
            label_dist={SourceType.TYPE_A: (1.0, 0.0, 0.0, 0.0)},
        )
        with pytest.raises(ValidationError):
            label(profile, excerpt("e", SourceType.TYPE_B))


class TestDefaultProfiles:
    def test_left_peaks_q2_on_type_b(self):
        left = get_profile("left")
        dist_b = left.label_dist[SourceType.TYPE_B]
        assert dist_b[Quadrant.Q2.index] == max(dist_b)
        assert dist_b[Quadrant.Q2.index] > max(left.label_dist[SourceType.TYPE_A])

    def test_right_is_mirror_of_left(self):
        left, right, _ = default_profiles()
        assert right.label_dist[SourceType.TYPE_A] == left.label_dist[SourceType.TYPE_B]
        assert right.label_dist[SourceType.TYPE_B] == left.label_dist[SourceType.TYPE_A]

    def test_center_q2_mass_equal_across_types(self):
        center = get_profile("center")
        a = center.label_dist[SourceType.TYPE_A][Quadrant.Q2.index]
        b = center.label_dist[SourceType.TYPE_B][Quadrant.Q2.index]
        assert a == b

    def test_mirror_twice_is_identity(self):
        left = get_profile("left")
        back = mirror_profile(
            mirror_profile(left, "tmp", Alignment.RIGHT), "left", Alignment.LEFT
        )
        assert back.label_dist == left.label_dist

    def test_mirror_labels_swap_with_pool(self):
        # Right on a swapped-type excerpt gives the same label Left gives on the original
        left, right, _ = default_profiles(seed=11)
        for i in range(40):
            orig = excerpt(f"e{i}", SourceType.TYPE_B)
            swapped = excerpt(f"e{i}", SourceType.TYPE_A)
            assert label(right, swapped) is label(left, orig)


class TestProfileIO:
    def test_json_roundtrip(self):
        left = get_profile("left", seed=9)
        back = OracleProfile.from_json_dict(left.to_json_dict())
        assert back == left

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "custom.json"
        profile = OracleProfile(
            name="custom",
            alignment=Alignment.CENTER,
            label_dist={
                SourceType.TYPE_A: (0.4, 0.2, 0.2, 0.2),
                SourceType.TYPE_B: (0.4, 0.2, 0.2, 0.2),
            },
            seed=2,
        )
        path.write_text(json.dumps(profile.to_json_dict()))
        assert get_profile(str(path)) == profile

    def test_unknown_name_rejected(self):
        with pytest.raises(ValidationError):
            get_profile("nope-not-a-profile")

    def test_invalid_distribution_rejected(self):
        with pytest.raises(ValidationError):
            OracleProfile(
                name="bad",
                alignment=Alignment.LEFT,
                label_dist={SourceType.TYPE_A: (0.5, 0.5, 0.5, 0.5)},
            )
