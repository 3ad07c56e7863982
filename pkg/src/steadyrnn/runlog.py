"""
RUNLOG class for SteadyRNN.

An event-sourced trace of one run: log lines and variable changes stored as
events with sortable stamps. Training, sweeps and the CLI record into it the
same way, a short message followed by a JSON-encoded event dict:

    runlog.add_log("Epoch complete: " + json.dumps(event))

Stamps are a zero-padded sequence rather than wall-clock time, so two runs
with the same configuration produce byte-identical traces.

Example:
    >>> from steadyrnn.runlog import RUNLOG
    >>>
    >>> runlog = RUNLOG(run_id="demo")
    >>> runlog.add_event("epoch", {"epoch": 1, "val_total": 0.71})
    >>> runlog.set_var("best_epoch", 1, desc="Epoch with lowest validation loss")
    >>> runlog.last_log_msg(content_only=True)
    'Epoch complete: {"epoch":1,"val_total":0.71}'
    >>> runlog.to_json("events.json")
"""

from __future__ import annotations

import json


class RUNLOG:
    """
    Event-sourced record of a training or evaluation run.

    Architecture:
        - DATA LAYER: events dict (stamp → event dict), the single source of truth
        - INDEX LAYER: idx_logs / idx_vars / idx_all, stamps in record order
        - VARIABLE LAYER: vars dict with full history as [stamp, value] pairs

    Attributes:
        id (str): Run identifier (deterministic, e.g. a config fingerprint).
        events (dict): Stamp → event dict.
        idx_logs (list): Stamps of log events.
        idx_vars (list): Stamps of variable changes.
        idx_all (list): Stamps of every event.
        vars (dict): Variable name → list of [stamp, value] pairs.
        var_desc (dict): Variable name → latest description.
        echo (callable): Optional ``fn(line)`` called for each log line.

    Methods:
        add_log(message): Add a log event.
        add_event(kind, payload): Log "<Kind> complete: <json>".
        set_var(key, value, desc=''): Append to a variable's history.
        get_var(key): Current value of a variable.
        get_var_history(key): Full [stamp, value] history.
        get_logs(limit=-1): Log events, oldest first.
        last_log_msg(content_only=False): The newest log event.
        snapshot(): Export as a dict.
        to_json(filename=None, indent=2): Export as JSON.
    """

    def __init__(self, run_id="run", echo=None):
        self.id = run_id
        self.events = {}
        self.idx_logs = []
        self.idx_vars = []
        self.idx_all = []
        self.vars = {}
        self.var_desc = {}
        self.echo = echo
        self._seq = 0

    #--- Internal Methods ---

    def _next_stamp(self):
        self._seq += 1
        return "{:08d}".format(self._seq)

    def _store_event(self, event_type, obj):
        stamp = obj['stamp']
        self.events[stamp] = obj
        if event_type == 'log':
            self.idx_logs.append(stamp)
        elif event_type == 'var':
            self.idx_vars.append(stamp)
        self.idx_all.append(stamp)

    #--- Public Methods ---

    def add_log(self, message):
        """
        Add a log event.

        Args:
            message: Log message content.
        """
        log_entry = {
            'stamp'   : self._next_stamp(),
            'type'    : 'log',
            'content' : message,
        }
        self._store_event('log', log_entry)
        if self.echo is not None:
            self.echo(message)

    def add_event(self, kind, payload):
        """
        Log a structured event as ``"<Kind> complete: <json>"``.

        Args:
            kind: Short event name, e.g. ``"epoch"`` or ``"sweep"``.
            payload: JSON-serializable dict.
        """
        body = json.dumps(payload, sort_keys=True, separators=(',', ':'), default=str)
        self.add_log("{} complete: {}".format(kind.capitalize(), body))

    def set_var(self, key, value, desc=''):
        """
        Store a variable by appending to its history list.

        Args:
            key: Variable name.
            value: JSON-serializable value.
            desc: Optional description; replaces the previous one when given.
        """
        stamp = self._next_stamp()
        self.vars.setdefault(key, []).append([stamp, value])
        if desc:
            self.var_desc[key] = desc
        self._store_event('var', {
            'stamp' : stamp,
            'type'  : 'var',
            'key'   : key,
            'value' : value,
        })

    def get_var(self, key, default=None):
        """Current value of a variable, or ``default``."""
        history = self.vars.get(key)
        if not history:
            return default
        return history[-1][1]

    def get_var_history(self, key):
        """Full history of a variable as [stamp, value] pairs."""
        return list(self.vars.get(key, []))

    def get_logs(self, limit=-1):
        """
        Get log events.

        Args:
            limit: Max logs to return (-1 = all), newest kept.

        Returns:
            List of log event dicts, oldest first.
        """
        stamps = self.idx_logs if limit <= 0 else self.idx_logs[-limit:]
        return [self.events[s] for s in stamps]

    def last_log_msg(self, content_only=False):
        """
        Get the last log message.

        Returns:
            dict or str: Full event dict, or content string if content_only=True.
                         Returns None (or '' if content_only) if there are no logs.
        """
        logs = self.get_logs(limit=1)
        if not logs:
            return '' if content_only else None
        return logs[-1]['content'] if content_only else logs[-1]

    def snapshot(self):
        """Export state as a dict with 'id', 'events' and 'var_desc'."""
        return {
            'id': self.id,
            'events': [self.events[s] for s in self.idx_all],
            'var_desc': dict(self.var_desc),
        }

    def to_json(self, filename=None, indent=2):
        """
        Export to JSON.

        Args:
            filename: Optional path; when omitted the JSON string is returned.
            indent: JSON indentation.
        """
        text = json.dumps(self.snapshot(), indent=indent, sort_keys=True, default=str) + "\n"
        if filename is None:
            return text
        with open(filename, "w", encoding="utf-8") as f:
            f.write(text)
        return None

    def __len__(self):
        return len(self.idx_all)

    def __repr__(self):
        return "RUNLOG(id={!r}, events={})".format(self.id, len(self.idx_all))
