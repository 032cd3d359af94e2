"""Process environment read by the command-line interface.

``NO_COLOR`` (any non-empty value) turns off ANSI colouring of verdicts.
"""
from starlette.config import Config


__all__ = ['config', 'no_color', 'use_color']


config = Config()


def no_color() -> bool:
    return bool(config('NO_COLOR', cast=str, default=''))


def use_color(stream) -> bool:
    if no_color():
        return False
    isatty = getattr(stream, 'isatty', None)
    return bool(isatty and isatty())
