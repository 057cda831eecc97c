for _ in range(2):
    for _ in range(2):
        for _ in range(2):
            Hit('drum', 10)
