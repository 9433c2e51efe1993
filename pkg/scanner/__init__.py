# RobustScanner recognizer: encoder, decoder branches, fusion head
