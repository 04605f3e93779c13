"""coexsim: Wi-Fi / unlicensed-LTE coexistence protocols and simulator."""

__version__ = "0.1.0"
