"""Device simulator server speaking the frame protocol over TCP.

A source object feeds the server. It must provide ``read(n) -> (volts, status)``
returning an ``(n, 9)`` array in volts (``None`` once exhausted) and a 16-bit
lead-off bitmap, and ``impedances_kohm() -> dict`` keyed by electrode label.
"""

import logging
import re
import socket
import threading
import time

from ..exceptions import ConfigError
from .montage import FS_HZ, N_STREAM_CHANNELS, STREAM_CHANNELS
from .packet import VERSION, Packet, encode_packet, packet_rate_budget, volts_to_raw
from .session import DEFAULT_GAIN, DEFAULT_V_REF

logger = logging.getLogger(__name__)


def parse_pacing(pace):
    """Speed-up factor for a pacing spec; ``None`` means unpaced.

    Accepts ``"realtime"``, ``"max"``, ``"accelerated(100)"``, ``"x100"`` or a number.
    """
    if pace is None or pace == "max":
        return None
    if isinstance(pace, (int, float)):
        factor = float(pace)
    elif pace == "realtime":
        factor = 1.0
    else:
        m = re.fullmatch(r"(?:accelerated\()?x?([0-9.eE+]+)\)?", str(pace).strip())
        if not m:
            raise ConfigError(f"unrecognized pacing {pace!r}")
        factor = float(m.group(1))
    if factor <= 0:
        raise ConfigError("pacing factor must be positive")
    return factor


class DeviceServer:
    """Serves one client at a time; see :func:`serve_device`."""

    def __init__(self, source, address=("127.0.0.1", 0), pacing="realtime", samples_per_packet=10,
                 v_ref=DEFAULT_V_REF, gain=DEFAULT_GAIN, fs_hz=FS_HZ, drop_seqs=()):
        packet_rate_budget(samples_per_packet, int(fs_hz))
        self.source = source
        self.factor = parse_pacing(pacing)
        self.samples_per_packet = samples_per_packet
        self.v_ref = v_ref
        self.gain = gain
        self.fs_hz = fs_hz
        self.drop_seqs = set(drop_seqs)
        self.seq = 0
        self.sample_index = 0
        self.bytes_sent = 0
        self.packets_sent = 0
        self.exhausted = False
        self._requested = address
        self._sock = None
        self._stop = threading.Event()
        self._thread = None
        self._streaming = threading.Event()
        self._write_lock = threading.Lock()

    @property
    def address(self):
        return self._sock.getsockname()[:2]

    def start(self):
        self._sock = socket.create_server(self._requested)
        self._sock.settimeout(0.1)
        self._thread = threading.Thread(target=self._accept_loop, name="vbmi-device", daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        self._streaming.clear()
        if self._thread is not None:
            self._thread.join(timeout=5)
        if self._sock is not None:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()

    def info_line(self):
        return (f"INFO channels={N_STREAM_CHANNELS} fs={self.fs_hz:g} vref={self.v_ref:g} gain={self.gain:g} "
                f"samples_per_packet={self.samples_per_packet} version={VERSION}")

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, peer = self._sock.accept()
            except (socket.timeout, OSError):
                continue
            logger.info("client connected from %s", peer)
            try:
                self._serve(conn)
            finally:
                self._streaming.clear()
                conn.close()
                logger.info("client %s gone; awaiting reconnect", peer)

    def _send(self, conn, data):
        with self._write_lock:
            conn.sendall(data)
            self.bytes_sent += len(data)

    def _serve(self, conn):
        conn.settimeout(0.1)
        closed = threading.Event()
        streamer = threading.Thread(target=self._stream_loop, args=(conn, closed), daemon=True)
        streamer.start()
        buf = b""
        try:
            while not self._stop.is_set():
                try:
                    data = conn.recv(4096)
                except socket.timeout:
                    continue
                if not data:
                    break
                buf += data
                while b"\n" in buf:
                    line, buf = buf.split(b"\n", 1)
                    self._send(conn, (self._command(line) + "\n").encode("ascii"))
        except OSError:
            pass
        finally:
            closed.set()
            self._streaming.clear()
            streamer.join(timeout=5)

    def _command(self, line):
        try:
            cmd = line.decode("utf-8").strip().upper()
        except UnicodeDecodeError:
            return "ERR malformed command"
        if cmd == "START":
            if self.exhausted:
                return "ERR source exhausted"
            self._streaming.set()
            return "OK START"
        if cmd == "STOP":
            self._streaming.clear()
            return "OK STOP"
        if cmd == "INFO":
            return self.info_line()
        if cmd == "IMPEDANCE":
            z = self.source.impedances_kohm()
            return "IMPEDANCE " + " ".join(f"{ch}={z[ch]:.3f}" for ch in STREAM_CHANNELS)
        return f"ERR malformed command {cmd[:40]!r}"

    def _stream_loop(self, conn, closed):
        n = self.samples_per_packet
        while not closed.is_set() and not self._stop.is_set():
            if not self._streaming.wait(timeout=0.05):
                continue
            t0 = time.monotonic()
            k = 0
            while self._streaming.is_set() and not closed.is_set():
                volts, status = self.source.read(n)
                if volts is None:
                    self.exhausted = True
                    self._streaming.clear()
                    try:
                        self._send(conn, b"EOS\n")
                    except OSError:
                        pass
                    break
                packet = Packet(self.seq, self.sample_index, status, volts_to_raw(volts, self.v_ref, self.gain))
                if self.seq not in self.drop_seqs:
                    try:
                        self._send(conn, encode_packet(packet))
                    except OSError:
                        closed.set()
                        break
                    self.packets_sent += 1
                self.seq = (self.seq + 1) & 0xFFFF
                self.sample_index += n
                k += 1
                if self.factor is not None:
                    delay = t0 + k * n / (self.fs_hz * self.factor) - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)


def serve_device(source, pacing="realtime", address=("127.0.0.1", 0), **kwargs):
    """Start a device simulator and return its running handle.

    Parameters
    ----------
    source : object
        Sample source, see module docstring.
    pacing : str or float
        ``"realtime"``, ``"accelerated(factor)"`` or ``"max"`` for unpaced.
    address : tuple
        Listen address; port 0 picks a free port (read it from ``.address``).
    """
    return DeviceServer(source, address=address, pacing=pacing, **kwargs).start()
