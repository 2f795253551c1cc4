"""
Lint Exceptions
"""


class LintError(ValueError):
    pass


class UnknownRule(LintError):
    """An enabled rule id is not in the catalog"""

    def __init__(self, rule_id: str):
        super().__init__(f"unknown lint rule {rule_id!r}")
        self.rule_id = rule_id


class InvalidRuleConfig(LintError):
    pass
