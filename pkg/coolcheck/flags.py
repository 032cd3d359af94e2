"""Validated option records.

Command-line flags and certificate bounds are run through WTForms forms, fed
from an :class:`~starlette.datastructures.ImmutableMultiDict` the same way
request form data would be.
"""
from typing import Any, Dict, Mapping, Type

from starlette.datastructures import ImmutableMultiDict
from wtforms import Form, IntegerField, StringField
from wtforms.validators import AnyOf, InputRequired, NumberRange, Optional

from coolcheck.equiv import KIND_NAMES
from coolcheck.errors import UsageError
from coolcheck.laws import DEFAULT_MAX_TERMS, DEFAULT_REWRITE_DEPTH
from coolcheck.lts import DEFAULT_MAX_STATES, LAX_MODES


__all__ = [
    'DEFAULT_CONTEXT_DEPTH',
    'DEFAULT_SAMPLES',
    'DEFAULT_LAW_DEPTH',
    'to_formdata',
    'validate',
    'validate_bounds',
    'BudgetForm',
    'ExploreForm',
    'EquivForm',
    'LaxCheckForm',
    'CheckUpToForm',
    'VerifyLawsForm',
    'RespectfulForm',
    'CertificateBoundsForm',
    ]


DEFAULT_CONTEXT_DEPTH = 1
DEFAULT_SAMPLES = 20
DEFAULT_LAW_DEPTH = 6
LTS_FORMATS = ('aldebaran', 'json')


class BudgetForm(Form):
    max_states = IntegerField(default=DEFAULT_MAX_STATES,
                              validators=[Optional(), NumberRange(min=1)])
    max_depth = IntegerField(validators=[Optional(), NumberRange(min=0)])


class ExploreForm(BudgetForm):
    lts_format = StringField(default='aldebaran',
                             validators=[Optional(), AnyOf(LTS_FORMATS)])


class EquivForm(BudgetForm):
    kind = StringField(validators=[InputRequired(), AnyOf(KIND_NAMES)])


class LaxCheckForm(BudgetForm):
    mode = StringField(default='bb', validators=[Optional(), AnyOf(LAX_MODES)])


class CheckUpToForm(Form):
    rewrite_depth = IntegerField(
        validators=[Optional(), NumberRange(min=0, max=12)])
    max_states = IntegerField(validators=[Optional(), NumberRange(min=1)])
    max_terms = IntegerField(validators=[Optional(), NumberRange(min=1)])


class VerifyLawsForm(BudgetForm):
    max_depth = IntegerField(default=DEFAULT_LAW_DEPTH,
                             validators=[Optional(), NumberRange(min=0)])


class RespectfulForm(BudgetForm):
    kind = StringField(validators=[InputRequired(), AnyOf(KIND_NAMES)])
    samples = IntegerField(default=DEFAULT_SAMPLES,
                           validators=[Optional(), NumberRange(min=1)])
    context_depth = IntegerField(default=DEFAULT_CONTEXT_DEPTH,
                                 validators=[Optional(), NumberRange(min=0, max=3)])


class CertificateBoundsForm(Form):
    rewrite_depth = IntegerField(default=DEFAULT_REWRITE_DEPTH,
                                 validators=[Optional(), NumberRange(min=0, max=12)])
    max_states = IntegerField(default=DEFAULT_MAX_STATES,
                              validators=[Optional(), NumberRange(min=1)])
    max_terms = IntegerField(default=DEFAULT_MAX_TERMS,
                             validators=[Optional(), NumberRange(min=1)])


def to_formdata(values: Mapping[str, Any]) -> ImmutableMultiDict:
    """Flatten a mapping of option values into form data. None values are
    left out so that field defaults apply.
    """
    items = []
    for key, value in values.items():
        if value is None:
            continue
        if isinstance(value, (list, tuple)):
            items.extend((key, str(v)) for v in value)
        else:
            items.append((key, str(value)))
    return ImmutableMultiDict(items)


def _describe_errors(errors: Dict[str, list]) -> str:
    return '; '.join(f'{name}: {", ".join(str(m) for m in messages)}'
                     for name, messages in sorted(errors.items()))


def validate(form_class: Type[Form], values: Mapping[str, Any],
             what: str='flags') -> Dict[str, Any]:
    """Validate ``values`` with ``form_class`` and return the cleaned data.

    Raises:
      UsageError: If validation fails; carries the form's error dict.

    """
    form = form_class(formdata=to_formdata(values))
    if not form.validate():
        raise UsageError(f'invalid {what}: {_describe_errors(form.errors)}',
                         form.errors)
    return form.data


def validate_bounds(bounds: Mapping[str, Any]) -> Dict[str, int]:
    unknown = set(bounds) - {'rewrite_depth', 'max_states', 'max_terms'}
    if unknown:
        raise UsageError(f'unknown certificate bounds: {", ".join(sorted(unknown))}')
    return validate(CertificateBoundsForm, bounds, 'certificate bounds')
