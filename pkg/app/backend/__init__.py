"""
BSD Lab - 하부 부분 적률(LPM) 기반 유계 확률지배(bounded stochastic dominance) 실험실
"""

__version__ = "0.1.0"
