"""TCP client for the device simulator with reconnect and loss accounting."""

import logging
import queue
import socket
import threading
import time

from .packet import FrameDecoder, Packet
from .session import ChunkAssembler, SessionEvent

logger = logging.getLogger(__name__)

_EOS = object()
_CLOSED = object()


class ClientSession:
    """Connects to a device server and yields ``SampleChunk`` and ``Gap`` records in order.

    Network reads happen on a background thread; chunks cross to the consumer
    through a bounded queue, so a slow consumer blocks the reader (and, via
    TCP flow control, the device).
    """

    def __init__(self, address, queue_size=256, backoff_base=0.05, backoff_max=2.0, max_retries=6,
                 connect_timeout=2.0):
        self.address = tuple(address)
        self.backoff_base = backoff_base
        self.backoff_max = backoff_max
        self.max_retries = max_retries
        self.connect_timeout = connect_timeout
        self.events = []
        self.info = {}
        self.bytes_received = 0
        self.assembler = ChunkAssembler()
        self._data = queue.Queue(maxsize=queue_size)
        self._replies = queue.Queue()
        self._sock = None
        self._reader = None
        self._closing = threading.Event()
        self._streaming = False
        self._decoder = FrameDecoder(text_lines=True)

    # connection management
    def _connect_with_backoff(self):
        delay = self.backoff_base
        for attempt in range(self.max_retries + 1):
            try:
                sock = socket.create_connection(self.address, timeout=self.connect_timeout)
            except OSError as exc:
                if attempt == self.max_retries or self._closing.is_set():
                    self.events.append(SessionEvent("gave_up", {"attempts": attempt + 1, "error": str(exc)}))
                    raise ConnectionError(f"cannot reach device at {self.address}: {exc}") from exc
                self.events.append(SessionEvent("retry", {"attempt": attempt + 1, "delay_s": delay}))
                time.sleep(delay)
                delay = min(2 * delay, self.backoff_max)
                continue
            sock.settimeout(0.2)
            self._sock = sock
            self._decoder = FrameDecoder(text_lines=True)
            return sock

    def connect(self):
        self._connect_with_backoff()
        self.events.append(SessionEvent("connected", {"address": self.address}))
        self._reader = threading.Thread(target=self._read_loop, name="vbmi-client", daemon=True)
        self._reader.start()
        self.info = self._parse_kv(self.command("INFO", "INFO"))
        if "vref" in self.info:
            self.assembler.v_ref = float(self.info["vref"])
            self.assembler.gain = float(self.info["gain"])
        return self

    def close(self):
        self._closing.set()
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        if self._reader is not None:
            self._reader.join(timeout=5)

    def __enter__(self):
        return self.connect()

    def __exit__(self, *exc):
        self.close()

    # commands
    def _send_line(self, text):
        self._sock.sendall((text + "\n").encode("utf-8"))

    def command(self, text, expect=None, timeout=5.0):
        """Send one command line and return the first reply starting with ``expect``."""
        self._send_line(text)
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError(f"no reply to {text!r}")
            reply = self._replies.get(timeout=remaining)
            if reply.startswith("ERR"):
                raise RuntimeError(reply)
            if expect is None or reply.startswith(expect):
                return reply

    def start(self):
        self._streaming = True
        return self.command("START", "OK START")

    def stop(self):
        self._streaming = False
        return self.command("STOP", "OK STOP")

    def impedance(self):
        return {k: float(v) for k, v in self._parse_kv(self.command("IMPEDANCE", "IMPEDANCE")).items()}

    @staticmethod
    def _parse_kv(line):
        return dict(tok.split("=", 1) for tok in line.split()[1:] if "=" in tok)

    # data path
    def _put(self, item):
        while True:
            try:
                self._data.put(item, timeout=0.1)
                return
            except queue.Full:
                if self._closing.is_set():
                    return

    def _read_loop(self):
        while not self._closing.is_set():
            try:
                data = self._sock.recv(65536)
            except socket.timeout:
                continue
            except OSError:
                data = b""
            if not data:
                if self._closing.is_set():
                    break
                self.events.append(SessionEvent("disconnected"))
                try:
                    self._connect_with_backoff()
                except ConnectionError:
                    self._put(_CLOSED)
                    return
                self.events.append(SessionEvent("reconnected"))
                if self._streaming:
                    self._send_line("START")
                continue
            self.bytes_received += len(data)
            for item in self._decoder.feed(data):
                if isinstance(item, Packet):
                    for rec in self.assembler.push(item):
                        self._put(rec)
                elif item == "EOS":
                    self._streaming = False
                    self._put(_EOS)
                else:
                    self._replies.put(item)
        self._put(_CLOSED)

    def records(self, timeout=None):
        """Yield chunks and gap records until end of stream or close."""
        while True:
            item = self._data.get(timeout=timeout)
            if item is _EOS or item is _CLOSED:
                return
            yield item

    def __iter__(self):
        return self.records()

    def loss_report(self):
        report = self.assembler.loss_report()
        report["corrupt_packets"] = self._decoder.n_corrupt
        report["reconnects"] = sum(e.kind == "reconnected" for e in self.events)
        return report


def client_session(address, **kwargs):
    """Open a connected :class:`ClientSession`."""
    return ClientSession(address, **kwargs).connect()
