from __future__ import annotations

from typing import Callable, Optional

from delibsched.errors import ResolutionError
from delibsched.rules import Rule, RuleSet


class RulePreset:
    def __init__(self, name: str, desc: str, build: Callable[[], RuleSet]):
        self.name = name
        self.desc = desc
        self.build = build

    @classmethod
    def get_by_name(cls, name: str) -> Optional[RulePreset]:
        for p in presets:
            if p.name == name:
                return p
        return None

    @classmethod
    def load(cls, name: str) -> RuleSet:
        preset = cls.get_by_name(name)
        if preset is None:
            known = ", ".join(p.name for p in presets)
            raise ResolutionError(f"unknown preset {name!r} (known: {known})")
        return preset.build()


def _three_rule() -> RuleSet:
    return RuleSet((Rule("r1", 0.2, 2), Rule("r2", 0.5, 5), Rule("r3", 0.7, 7)))


def _mailsort() -> RuleSet:
    from delibsched.mailsort import SorterConfig, make_network_rules

    return make_network_rules(SorterConfig())


presets = [
    RulePreset("three-rule", "Three rules: r1 (0.2, 2), r2 (0.5, 5), r3 (0.7, 7)", _three_rule),
    RulePreset("mailsort", "40 recognizer networks (lambda 0.9) plus reject", _mailsort),
]
