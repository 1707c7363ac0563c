from enum import IntEnum


class Action(IntEnum):
    SIT = 0
    BUY = 1
    SELL = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "Action":
        return cls[text.strip().upper()]


ACTIONS = tuple(Action)
