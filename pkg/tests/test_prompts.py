"""
Tests for prompt templates.
"""

import pytest

from benchgen.prompts import (FEEDBACK_HEADER, PREDICATE_DOCS, feedback_block, fill_template,
                              get_available_templates, get_template, predicate_library_text, strategy_block)


class TestTemplates:
    """Test template loading and filling."""

    def test_all_templates_load(self):
        """Test that every registered template ships with the package."""
        for name in get_available_templates():
            assert get_template(name).strip()

    def test_unknown_template(self):
        with pytest.raises(ValueError, match="Unknown template 'nope'"):
            get_template("nope")

    def test_fill_template(self):
        assert fill_template("Theme: [THEME], count [TARGET_COUNT]", theme="kitchen", target_count=8) == \
            "Theme: kitchen, count 8"

    def test_unfilled_placeholders_kept(self):
        assert fill_template("[A] and [B]", a=1) == "1 and [B]"

    def test_scene_user_placeholders(self):
        text = get_template("scene_user")
        assert "[THEME]" in text


class TestStrategy:
    """Test density strategy selection."""

    @pytest.mark.parametrize("count,label", [
        (3, "SPARSE"), (9, "SPARSE"), (10, "MEDIUM"), (14, "MEDIUM"), (15, "DENSE"), (30, "DENSE"),
    ])
    def test_thresholds(self, count, label):
        assert strategy_block(count).startswith(label)


class TestFeedback:
    """Test feedback and predicate library blocks."""

    def test_feedback_block(self):
        block = feedback_block("  Object 'apple' fell off 'table' with displacement 0.20m\n")
        assert block.startswith(FEEDBACK_HEADER)
        assert "Object 'apple' fell off 'table' with displacement 0.20m" in block

    def test_predicate_library_lists_every_predicate(self):
        text = predicate_library_text()
        for name in PREDICATE_DOCS:
            assert f"- {name}:" in text
