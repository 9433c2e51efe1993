# Configuration module for RSLab
