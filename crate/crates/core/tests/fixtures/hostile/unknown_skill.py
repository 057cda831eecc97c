Explode('left')
